# Copyright (c) 2026 liqpde developers
# MIT License

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from liqpde.coefficients import Coefficient, from_spec
from liqpde.data_models import ProblemSection
from liqpde.exceptions import AssumptionViolation
from liqpde.generator import DiscreteGenerator, tensor_nodes

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Ito diffusion dY = b(Y) ds + sigma(Y) dW driving the cost coefficients."""

    dim: int
    noise_dim: int
    drift: Tuple[Coefficient, ...]
    diffusion: Tuple[Tuple[Coefficient, ...], ...]
    drift_bound: float = math.inf
    diffusion_bound: float = math.inf
    lipschitz: float = math.inf
    ellipticity: float = 0.0

    def b(self, y: np.ndarray) -> np.ndarray:
        return np.stack([c(y) for c in self.drift], axis=-1)

    def sigma(self, y: np.ndarray) -> np.ndarray:
        return np.stack([np.stack([c(y) for c in row], axis=-1) for row in self.diffusion], axis=-2)

    def covariance(self, y: np.ndarray) -> np.ndarray:
        s = self.sigma(y)
        return s @ np.swapaxes(s, -1, -2)


@dataclass(frozen=True, eq=False)
class CostModel:
    eta: Coefficient
    gamma: Coefficient
    lam: Coefficient
    theta: float
    p: float
    kappa0: float
    eta_bound: float = math.nan
    gamma_bound: float = math.nan
    lambda_bound: float = math.nan
    op_eta_bound: float = math.nan

    @property
    def beta(self) -> float:
        return 1.0 / (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray
    boundary: str = "neumann"

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, y: np.ndarray) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all((y >= self.lower) & (y <= self.upper)))

    def clamp(self, y: np.ndarray) -> np.ndarray:
        return np.clip(y, self.lower, self.upper)

    def reflect(self, y: np.ndarray) -> np.ndarray:
        """Fold points back into the box, mirroring at each face."""
        period = 2 * self.width
        shifted = np.mod(y - self.lower, period)
        return self.lower + np.where(shifted > self.width, period - shifted, shifted)

    def is_interior(self, y: np.ndarray, fraction: float = 0.2) -> bool:
        y = np.asarray(y, dtype=float)
        margin = fraction * self.width
        return bool(np.all((y >= self.lower + margin - 1e-12) & (y <= self.upper - margin + 1e-12)))

    def widened(self, factor: float) -> "Box":
        centre = 0.5 * (self.lower + self.upper)
        half = 0.5 * factor * self.width
        return Box(centre - half, centre + half, self.boundary)


@dataclass(frozen=True)
class InitialState:
    t0: float
    y0: Tuple[float, ...]
    x0: float


@dataclass(frozen=True, eq=False)
class LiquidationProblem:
    factor: FactorModel
    costs: CostModel
    horizon: float
    domain: Box
    initial: InitialState
    mesh_density: int = 101
    tolerance: float = 1e-9
    nodes: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.nodes is None:
            nodes = tensor_nodes(self.validation_axes())
            nodes.setflags(write=False)
            object.__setattr__(self, "nodes", nodes)

    @property
    def dim(self) -> int:
        return self.factor.dim

    def validation_axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(lo, hi, self.mesh_density)
            for lo, hi in zip(self.domain.lower, self.domain.upper)
        )

    def validation_nodes(self) -> np.ndarray:
        assert self.nodes is not None
        return self.nodes

    def with_domain(self, domain: Box) -> "LiquidationProblem":
        return replace(self, domain=domain, nodes=None)

    def validate(self) -> "LiquidationProblem":
        validate_problem(self)
        return self


def _check_initial(problem: LiquidationProblem) -> None:
    t0 = problem.initial.t0
    if not 0 <= t0 < problem.horizon:
        raise AssumptionViolation(
            "initial state", f"t0={t0} must lie in [0, T) with T={problem.horizon}"
        )
    if not problem.domain.contains(problem.initial.y0):
        raise AssumptionViolation(
            "initial state", "y0 outside the truncation box", problem.initial.y0
        )


def _check_factor(problem: LiquidationProblem, nodes: np.ndarray) -> None:
    factor = problem.factor
    tol = problem.tolerance
    drift = factor.b(nodes)
    sigma = factor.sigma(nodes)

    for name, values in (("drift", drift), ("diffusion", sigma)):
        flat = values.reshape(len(nodes), -1)
        bad = ~np.all(np.isfinite(flat), axis=1)
        if bad.any():
            raise AssumptionViolation(
                "bounded factor coefficients", f"{name} is not finite", nodes[np.argmax(bad)]
            )

    drift_size = np.abs(drift).max(axis=-1)
    if drift_size.max() > factor.drift_bound * (1 + tol) + tol:
        raise AssumptionViolation(
            "bounded factor coefficients",
            f"|b| = {drift_size.max():.6g} exceeds declared bound {factor.drift_bound}",
            nodes[np.argmax(drift_size)],
        )
    sigma_size = np.abs(sigma).reshape(len(nodes), -1).max(axis=-1)
    if sigma_size.max() > factor.diffusion_bound * (1 + tol) + tol:
        raise AssumptionViolation(
            "bounded factor coefficients",
            f"|sigma| = {sigma_size.max():.6g} exceeds declared bound {factor.diffusion_bound}",
            nodes[np.argmax(sigma_size)],
        )

    ratio, witness = lipschitz_ratio(problem, nodes, drift, sigma)
    if ratio > factor.lipschitz * (1 + tol) + tol:
        raise AssumptionViolation(
            "Lipschitz factor coefficients",
            f"sampled Lipschitz ratio {ratio:.6g} exceeds declared constant {factor.lipschitz}",
            witness,
        )

    eigen = np.linalg.eigvalsh(factor.covariance(nodes)).min(axis=-1)
    worst = int(np.argmin(eigen))
    if factor.ellipticity <= 0 or eigen[worst] < factor.ellipticity * (1 - tol) - tol:
        raise AssumptionViolation(
            "uniform ellipticity",
            f"smallest eigenvalue of sigma sigma^T is {eigen[worst]:.6g}, "
            f"declared bound {factor.ellipticity}",
            nodes[worst],
        )


def lipschitz_ratio(
    problem: LiquidationProblem,
    nodes: np.ndarray,
    drift: np.ndarray,
    sigma: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """Largest difference quotient of (b, sigma) between mesh neighbours."""
    shape = tuple(problem.mesh_density for _ in range(problem.dim))
    values = np.concatenate([drift, sigma.reshape(len(nodes), -1)], axis=-1)
    values = values.reshape(shape + (-1,))
    grid = nodes.reshape(shape + (problem.dim,))
    best, witness = 0.0, grid.reshape(-1, problem.dim)[0]
    for axis in range(problem.dim):
        h = (problem.domain.upper[axis] - problem.domain.lower[axis]) / (problem.mesh_density - 1)
        quotient = np.abs(np.diff(values, axis=axis)).max(axis=-1) / h
        if quotient.size and quotient.max() > best:
            best = float(quotient.max())
            index = np.unravel_index(np.argmax(quotient), quotient.shape)
            witness = grid[index]
    return best, witness


def _check_costs(problem: LiquidationProblem, nodes: np.ndarray) -> None:
    costs = problem.costs
    tol = problem.tolerance
    if not costs.p > 1:
        raise AssumptionViolation("cost exponent", f"p = {costs.p} must exceed 1")

    for name, coefficient in (("eta", costs.eta), ("gamma", costs.gamma), ("lambda", costs.lam)):
        values = coefficient(nodes)
        if not np.all(np.isfinite(values)):
            raise AssumptionViolation(
                "bounded cost coefficients",
                f"{name} is not finite",
                nodes[np.argmax(~np.isfinite(values))],
            )

    eta = costs.eta(nodes)
    worst = int(np.argmin(eta))
    if eta[worst] < costs.kappa0 - tol:
        raise AssumptionViolation(
            "impact floor",
            f"eta = {eta[worst]:.6g} below kappa0 = {costs.kappa0}",
            nodes[worst],
        )
    for name, coefficient in (("gamma", costs.gamma), ("lambda", costs.lam)):
        values = coefficient(nodes)
        worst = int(np.argmin(values))
        if values[worst] < -tol:
            raise AssumptionViolation(
                "nonnegative costs", f"{name} = {values[worst]:.6g} is negative", nodes[worst]
            )


def validate_problem(problem: LiquidationProblem) -> None:
    """
    Check the standing assumptions on the validation mesh. Raises
    AssumptionViolation naming the assumption and the witness node.
    """
    _check_initial(problem)
    nodes = problem.validation_nodes()
    _check_costs(problem, nodes)
    _check_factor(problem, nodes)
    logger.debug("Problem validated on %s mesh nodes", len(nodes))


def operator_eta_bound(factor: FactorModel, eta: Coefficient, axes: Tuple[np.ndarray, ...]) -> float:
    """sup |L_h eta| over interior nodes of the given mesh."""
    generator = DiscreteGenerator(factor, axes)
    values = generator.apply(eta(generator.nodes)).reshape(generator.shape)
    interior = values[tuple(slice(1, -1) for _ in axes)]
    return float(np.abs(interior).max()) if interior.size else 0.0


def _measured(declared: Optional[float], measured: float) -> float:
    return measured if declared is None else declared


def build_problem(
    config: Union[ProblemSection, dict], validate: bool = True
) -> LiquidationProblem:
    """
    Build a LiquidationProblem from a problem section. Undeclared factor bounds
    are populated from measurements on the validation mesh, cost sup-norms and
    |L eta| are always measured.
    """
    if not isinstance(config, ProblemSection):
        config = ProblemSection.model_validate(config)
    d = config.factor.dim
    if config.costs.p <= 1:
        raise AssumptionViolation("cost exponent", f"p = {config.costs.p} must exceed 1")

    drift = tuple(from_spec(spec, d) for spec in config.factor.drift)
    diffusion = tuple(tuple(from_spec(spec, d) for spec in row) for row in config.factor.diffusion)
    domain = Box(
        np.asarray(config.domain.lower, dtype=float),
        np.asarray(config.domain.upper, dtype=float),
        config.domain.boundary,
    )
    raw_factor = FactorModel(d, config.factor.noise_dim, drift, diffusion)
    costs = CostModel(
        eta=from_spec(config.costs.eta, d),
        gamma=from_spec(config.costs.gamma, d),
        lam=from_spec(config.costs.lam, d),
        theta=config.costs.theta,
        p=config.costs.p,
        kappa0=config.costs.kappa0,
    )
    initial = InitialState(
        config.initial.t0, tuple(float(v) for v in config.initial.y0), config.initial.x0
    )
    problem = LiquidationProblem(
        raw_factor,
        costs,
        config.horizon,
        domain,
        initial,
        config.mesh_density,
        config.tolerance,
    )

    nodes = problem.validation_nodes()
    drift_values = raw_factor.b(nodes)
    sigma_values = raw_factor.sigma(nodes)
    lipschitz, _ = lipschitz_ratio(problem, nodes, drift_values, sigma_values)
    eigen = float(np.linalg.eigvalsh(raw_factor.covariance(nodes)).min())
    factor = replace(
        raw_factor,
        drift_bound=_measured(config.factor.drift_bound, float(np.abs(drift_values).max())),
        diffusion_bound=_measured(config.factor.diffusion_bound, float(np.abs(sigma_values).max())),
        lipschitz=_measured(config.factor.lipschitz, lipschitz),
        ellipticity=_measured(config.factor.ellipticity, eigen),
    )
    costs = replace(
        costs,
        eta_bound=float(np.abs(costs.eta(nodes)).max()),
        gamma_bound=float(np.abs(costs.gamma(nodes)).max()),
        lambda_bound=float(np.abs(costs.lam(nodes)).max()),
        op_eta_bound=operator_eta_bound(factor, costs.eta, problem.validation_axes()),
    )
    problem = replace(problem, factor=factor, costs=costs)
    if validate:
        validate_problem(problem)
    logger.info(
        "Built problem: d=%s, p=%s, beta=%.6g, T=%s, |eta|=%.6g, |L eta|=%.6g, |lambda|=%.6g",
        d,
        costs.p,
        costs.beta,
        problem.horizon,
        costs.eta_bound,
        costs.op_eta_bound,
        costs.lambda_bound,
    )
    return problem
