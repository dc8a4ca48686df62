# Copyright (c) 2026 liqpde developers
# MIT License

"""
Method-of-lines solver for the corrector u of the singular ansatz

    v(t, y) = eta(y) / tau^(1/beta) + u(tau, y) / tau^p,   tau = T - t,

which solves u' = L u + f(tau, u) with u(0) = 0 in reversed time. Also holds the
fixed-point (Picard) iteration on a short horizon with its contraction
certificate, and checks of the terminal asymptotics.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from liqpde.coefficients import as_states
from liqpde.exceptions import GrowthConditionViolation, SingularTimeError, SolverError
from liqpde.generator import DiscreteGenerator, tensor_nodes
from liqpde.hjb_core import GROWTH_SLACK, f_split
from liqpde.model import LiquidationProblem

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Grid:
    """Reversed-time nodes refined geometrically near 0, uniform tensor space mesh."""

    time_nodes: np.ndarray
    axes: Tuple[np.ndarray, ...]
    n_time: int
    n_space: int
    refinement_ratio: float = 0.5
    n_refine: int = 10
    boundary: str = "neumann"

    def __post_init__(self) -> None:
        if self.time_nodes[0] != 0.0:
            raise ValueError("Time mesh must start at 0")
        if np.any(np.diff(self.time_nodes) <= 0):
            raise ValueError("Time mesh must be strictly increasing")
        if not 0 < self.refinement_ratio < 1:
            raise ValueError("Refinement ratio must lie in (0, 1)")
        if any(len(axis) < 3 for axis in self.axes):
            raise ValueError("At least 3 space nodes per axis are required")

    @classmethod
    def build(
        cls,
        problem: LiquidationProblem,
        n_time: int = 1000,
        n_space: int = 41,
        refinement_ratio: float = 0.5,
        n_refine: int = 10,
    ) -> "Grid":
        h = problem.horizon / n_time
        refined = h * refinement_ratio ** np.arange(n_refine, 0, -1)
        uniform = h * np.arange(1, n_time + 1)
        uniform[-1] = problem.horizon
        time_nodes = np.concatenate([[0.0], refined, uniform])
        axes = tuple(
            np.linspace(lo, hi, n_space) for lo, hi in zip(problem.domain.lower, problem.domain.upper)
        )
        return cls(time_nodes, axes, n_time, n_space, refinement_ratio, n_refine)

    def refined(self, problem: LiquidationProblem) -> "Grid":
        """Halve both mesh widths."""
        return Grid.build(
            problem, 2 * self.n_time, 2 * (self.n_space - 1) + 1, self.refinement_ratio, self.n_refine
        )

    @property
    def horizon(self) -> float:
        return float(self.time_nodes[-1])

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)

    @property
    def space_nodes(self) -> np.ndarray:
        return tensor_nodes(self.axes)


@dataclass(frozen=True, eq=False)
class TransformedSurface:
    grid: Grid
    values: np.ndarray  # (n_time_nodes, n_space_nodes), reversed time major
    max_residual: float = 0.0

    def at(self, j: int) -> np.ndarray:
        return self.values[j].reshape(self.grid.shape)


def weighted_norm(u: TransformedSurface, delta: float) -> float:
    """sup over nodes 0 < t_j <= delta of max_y |u(t_j, y)| / t_j^2."""
    return _weighted_norm(u.grid.time_nodes, u.values, delta)


def _weighted_norm(times: np.ndarray, values: np.ndarray, delta: float) -> float:
    if delta > times[-1] * (1 + 1e-12):
        raise ValueError(f"delta={delta} exceeds the last time node {times[-1]}")
    mask = (times > 0) & (times <= delta * (1 + 1e-12))
    if not mask.any():
        return 0.0
    return float((np.abs(values[mask]).max(axis=1) / times[mask] ** 2).max())


class _Coefficients:
    """Cost coefficients sampled on the space nodes of a grid."""

    def __init__(self, problem: LiquidationProblem, generator: DiscreteGenerator) -> None:
        nodes = generator.nodes
        costs = problem.costs
        self.eta = costs.eta(nodes)
        self.lam = costs.lam(nodes)
        self.gamma = costs.gamma(nodes)
        self.op_eta = generator.apply(self.eta)
        self.theta = costs.theta
        self.p = costs.p

    def split(self, t: float, u: np.ndarray, series_tol: float) -> Tuple[np.ndarray, np.ndarray]:
        return f_split(
            t, u, self.eta, self.lam, self.gamma, self.op_eta, self.theta, self.p, series_tol, check=False
        )

    def f(self, t: float, u: np.ndarray, series_tol: float) -> np.ndarray:
        source, q = self.split(t, u, series_tol)
        return source + (q - self.theta) * u

    def growth_excess(self, t: float, u: np.ndarray) -> np.ndarray:
        return np.abs(u) - t * self.eta * (1 + GROWTH_SLACK) - GROWTH_SLACK


class _StepFailed(Exception):
    def __init__(self, reason: str, node: int):
        self.reason = reason
        self.node = node


class _ImplicitStepper:
    def __init__(
        self,
        generator: DiscreteGenerator,
        coefficients: _Coefficients,
        series_tol: float,
        solver_tol: float,
        max_sweeps: int,
        min_step: float,
    ) -> None:
        self.generator = generator
        self.coefficients = coefficients
        self.series_tol = series_tol
        self.solver_tol = solver_tol
        self.max_sweeps = max_sweeps
        self.min_step = min_step
        self.halvings = 0
        self.max_residual = 0.0

    def _single(self, t_a: float, u_a: np.ndarray, t_b: float) -> Tuple[np.ndarray, float]:
        c = self.coefficients
        dt = t_b - t_a
        w = u_a
        residual = math.inf
        for sweep in range(self.max_sweeps):
            source, q = c.split(t_b, w, self.series_tol)
            lu = splu(self.generator.step_matrix(dt, q - c.theta))
            u_b = lu.solve(u_a + dt * source)
            excess = c.growth_excess(t_b, u_b)
            if np.any(excess > 0):
                raise _StepFailed("growth condition", int(np.argmax(excess)))
            residual_vector = u_b - u_a - dt * (self.generator.matrix @ u_b + c.f(t_b, u_b, self.series_tol))
            residual = float(np.abs(residual_vector).max())
            w = u_b
            if residual <= self.solver_tol:
                return u_b, residual
        raise _StepFailed(
            f"no convergence after {self.max_sweeps} sweeps (residual {residual:.3g})",
            int(np.argmax(np.abs(residual_vector))),
        )

    def advance(self, t_a: float, u_a: np.ndarray, t_b: float) -> np.ndarray:
        try:
            u_b, residual = self._single(t_a, u_a, t_b)
        except _StepFailed as e:
            dt = t_b - t_a
            if dt / 2 < self.min_step:
                node = self.generator.nodes[e.node]
                raise SolverError(
                    f"Time step fell below {self.min_step} at t={t_b:.6g}, y={node.tolist()}: {e.reason}",
                    time=t_b,
                    node=tuple(node.tolist()),
                ) from e
            self.halvings += 1
            logger.warning("Halving step at t=%.6g (dt=%.3g): %s", t_b, dt, e.reason)
            t_mid = t_a + dt / 2
            return self.advance(t_mid, self.advance(t_a, u_a, t_mid), t_b)
        self.max_residual = max(self.max_residual, residual)
        return u_b


def solve_u(
    problem: LiquidationProblem,
    grid: Grid,
    series_tol: float = 1e-12,
    solver_tol: float = 1e-10,
    max_sweeps: int = 50,
    min_step: float = 1e-12,
) -> TransformedSurface:
    """
    Implicit Euler in reversed time. The series part of f is linearized around
    the previous sweep, -theta u and L_h are implicit, the dark pool term is
    lagged. Sweeps repeat until the discrete residual is below `solver_tol`.
    """
    generator = DiscreteGenerator(problem.factor, grid.axes)
    coefficients = _Coefficients(problem, generator)
    stepper = _ImplicitStepper(generator, coefficients, series_tol, solver_tol, max_sweeps, min_step)
    times = grid.time_nodes
    values = np.zeros((len(times), generator.size))
    for j in range(1, len(times)):
        values[j] = stepper.advance(times[j - 1], values[j - 1], times[j])
        if j % 250 == 0:
            logger.debug("t=%.6g, max|u|=%.6g", times[j], np.abs(values[j]).max())
    logger.info(
        "Solved corrector on %s time nodes x %s space nodes (max residual %.3g, %s halvings)",
        len(times),
        generator.size,
        stepper.max_residual,
        stepper.halvings,
    )
    return TransformedSurface(grid, values, stepper.max_residual)


class ValueSurface:
    """
    v(t, y) on [0, T) x box, rebuilt from the corrector: u is interpolated
    (linear in reversed time, multilinear in y) and the singular factor is
    applied afterwards.
    """

    def __init__(self, problem: LiquidationProblem, u_surface: TransformedSurface) -> None:
        self.problem = problem
        self.u_surface = u_surface
        self.grid = u_surface.grid
        self.beta = problem.costs.beta
        self.p = problem.costs.p
        self.eta_samples = problem.costs.eta(self.grid.space_nodes)
        self._interpolant = RegularGridInterpolator(
            (self.grid.time_nodes,) + self.grid.axes,
            u_surface.values.reshape((len(self.grid.time_nodes),) + self.grid.shape),
            method="linear",
            bounds_error=False,
            fill_value=None,
        )

    @property
    def horizon(self) -> float:
        return self.problem.horizon

    def corrector(self, tau: np.ndarray, y: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        states = self.problem.domain.clamp(as_states(y, self.problem.dim))
        tau, _ = np.broadcast_arrays(tau, states[..., 0])
        points = np.concatenate([tau[..., None], states], axis=-1)
        return self._interpolant(points.reshape(-1, points.shape[-1])).reshape(tau.shape)

    def query(self, t: np.ndarray, y: np.ndarray) -> np.ndarray:
        """v(t, y) for forward times t < T."""
        tau = self.horizon - np.asarray(t, dtype=float)
        if np.any(tau <= 0):
            raise SingularTimeError(f"v is defined on [0, T) only, got t={np.max(t)} with T={self.horizon}")
        states = self.problem.domain.clamp(as_states(y, self.problem.dim))
        eta = self.problem.costs.eta(states)
        tau, eta = np.broadcast_arrays(tau, eta)
        value = eta / tau ** (1.0 / self.beta)
        near = tau < self.grid.time_nodes[1]
        if not near.all():
            u = self.corrector(np.where(near, self.grid.time_nodes[1], tau), states)
            value = value + np.where(near, 0.0, u / tau**self.p)
        value = np.maximum(value, 0.0)
        return float(value) if value.ndim == 0 else value

    __call__ = query

    def nodal_values(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(forward times, u, v) on every node with t < T, time-major in increasing t."""
        taus = self.grid.time_nodes[1:][::-1]
        u = self.u_surface.values[1:][::-1]
        v = self.eta_samples[None, :] / taus[:, None] ** (1.0 / self.beta) + u / taus[:, None] ** self.p
        return self.horizon - taus, u, v


def solve_v(
    problem: LiquidationProblem,
    grid: Grid,
    series_tol: float = 1e-12,
    **solver_options: float,
) -> ValueSurface:
    return ValueSurface(problem, solve_u(problem, grid, series_tol, **solver_options))


@dataclass(frozen=True)
class ContractionCertificate:
    M: float
    R: float
    delta: float
    L: float
    observed_factors: Tuple[float, ...] = ()

    @property
    def degenerate(self) -> bool:
        return self.R == 0.0


def contraction_certificate(
    problem: LiquidationProblem, grid: Optional[Grid] = None
) -> ContractionCertificate:
    """
    Constants of the fixed-point argument:
    R = 2M(|L eta| + |lambda| + theta |eta|), L = p(2^beta - 1) R |eta| / kappa0^2 + theta,
    delta = min(kappa0/R, 1/(2ML), 1).
    """
    costs = problem.costs
    axes = grid.axes if grid is not None else problem.validation_axes()
    M = DiscreteGenerator(problem.factor, axes).semigroup_bound()
    R = 2 * M * (costs.op_eta_bound + costs.lambda_bound + costs.theta * costs.eta_bound)
    L = costs.p * (2**costs.beta - 1) * R * costs.eta_bound / costs.kappa0**2 + costs.theta
    delta = min(
        costs.kappa0 / R if R > 0 else math.inf,
        1.0 / (2 * M * L) if L > 0 else math.inf,
        1.0,
    )
    if R == 0:
        logger.warning("Degenerate certificate: R = 0, all sources vanish")
    return ContractionCertificate(M=M, R=R, delta=delta, L=L)


@dataclass(frozen=True)
class PicardResult:
    iterates: List[TransformedSurface]
    distances: Tuple[float, ...]
    factors: Tuple[float, ...]
    left_ball: bool
    certificate: ContractionCertificate


def picard_run(
    problem: LiquidationProblem,
    grid: Grid,
    delta: float,
    n_iter: int,
    series_tol: float = 1e-12,
    tol: float = 1e-13,
    certificate: Optional[ContractionCertificate] = None,
) -> PicardResult:
    """
    Iterate u_{m+1} = Gamma(u_m) from u_0 = 0 on [0, delta] with the discrete
    mild form Gamma(u)_j = (I - dt_j L_h)^-1 (Gamma(u)_{j-1} + dt_j f(t_j, u_j)).
    Stops early once successive iterates agree within `tol` in the weighted norm.
    """
    certificate = certificate or contraction_certificate(problem, grid)
    if delta > certificate.delta * (1 + 1e-12):
        raise ValueError(f"delta={delta} exceeds the certified horizon {certificate.delta}")

    times = np.union1d(grid.time_nodes[grid.time_nodes < delta], [delta])
    sub_grid = Grid(
        times, grid.axes, grid.n_time, grid.n_space, grid.refinement_ratio, grid.n_refine
    )
    generator = DiscreteGenerator(problem.factor, grid.axes)
    coefficients = _Coefficients(problem, generator)
    resolvents: Dict[float, Callable[[np.ndarray], np.ndarray]] = {}

    def gamma_map(u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        for j in range(1, len(times)):
            dt = times[j] - times[j - 1]
            if dt not in resolvents:
                resolvents[dt] = generator.resolvent(dt)
            if np.any(coefficients.growth_excess(times[j], u[j]) > 0):
                raise GrowthConditionViolation(f"iterate breaks |u| <= t eta at t={times[j]:.6g}")
            forcing = coefficients.f(times[j], u[j], series_tol)
            out[j] = resolvents[dt](out[j - 1] + dt * forcing)
        return out

    current = np.zeros((len(times), generator.size))
    iterates = [TransformedSurface(sub_grid, current)]
    distances: List[float] = []
    factors: List[float] = []
    left_ball = False
    for m in range(n_iter):
        try:
            following = gamma_map(current)
        except GrowthConditionViolation as e:
            logger.warning("Picard iterate %s left the admissible set: %s", m + 1, e)
            left_ball = True
            break
        distance = _weighted_norm(times, following - current, delta)
        if distances and distances[-1] > 0:
            factors.append(distance / distances[-1])
        distances.append(distance)
        iterates.append(TransformedSurface(sub_grid, following))
        if _weighted_norm(times, following, delta) > certificate.R * (1 + 1e-9) + 1e-15:
            logger.warning("Picard iterate %s left the ball of radius %.6g", m + 1, certificate.R)
            left_ball = True
        current = following
        if distance <= tol:
            break
    logger.info(
        "Picard run: %s iterates on [0, %.6g], factors %s",
        len(iterates) - 1,
        delta,
        ", ".join(f"{f:.3g}" for f in factors),
    )
    certificate = ContractionCertificate(
        certificate.M, certificate.R, certificate.delta, certificate.L, tuple(factors)
    )
    return PicardResult(iterates, tuple(distances), tuple(factors), left_ball, certificate)


@dataclass(frozen=True)
class AsymptoticsReport:
    taus: np.ndarray
    deviations: np.ndarray
    slope: float
    exact: bool
    bounded: bool
    envelope_constant: float
    max_ratio: float


def check_asymptotics(surface: ValueSurface, fraction: Optional[float] = None) -> AsymptoticsReport:
    """
    e(tau) = sup_y |tau^(1/beta) v(T - tau, y) - eta(y)| = sup_y |u(tau, y)| / tau on
    the nodes tau <= fraction * T, with the log-log slope of e against tau.

    By default the nodes are the geometric layer tau <= T / n_time, where the
    relative error of the implicit scheme is constant from node to node and
    does not bias the slope.
    """
    grid = surface.grid
    costs = surface.problem.costs
    limit = grid.horizon / grid.n_time if fraction is None else fraction * surface.horizon
    if fraction is None and grid.n_refine < 2:
        limit = 0.25 * surface.horizon
    mask = (grid.time_nodes > 0) & (grid.time_nodes <= limit * (1 + 1e-12))
    taus = grid.time_nodes[mask]
    deviations = np.abs(surface.u_surface.values[mask]).max(axis=1) / taus
    constant = costs.op_eta_bound + costs.theta * costs.eta_bound + costs.lambda_bound
    scale = max(1.0, float(taus.max()) ** (1.0 / costs.beta)) if len(taus) else 1.0
    ratios = deviations / taus
    max_ratio = float(ratios.max()) if len(ratios) else 0.0

    exact = bool(len(deviations) == 0 or deviations.max() <= 1e-12)
    if exact:
        slope = math.nan
    else:
        usable = deviations > 0
        slope = float(np.polyfit(np.log(taus[usable]), np.log(deviations[usable]), 1)[0])
    bounded = exact or max_ratio <= 1.05 * constant * scale + 1e-9
    logger.info("Asymptotics: slope=%.4g, max e/tau=%.4g, envelope=%.4g", slope, max_ratio, constant)
    return AsymptoticsReport(taus, deviations, slope, exact, bounded, constant, max_ratio)


@dataclass(frozen=True)
class BoxSensitivity:
    widen: float
    probes: np.ndarray
    base: np.ndarray
    widened: np.ndarray

    @property
    def max_difference(self) -> float:
        return float(np.abs(self.widened - self.base).max())


def box_sensitivity(
    problem: LiquidationProblem,
    grid: Grid,
    widen: float = 2.0,
    probes: Optional[Sequence[Sequence[float]]] = None,
    **solver_options: float,
) -> BoxSensitivity:
    """Re-solve on a box widened about its centre with the same spacing and compare v(t0, .)."""
    if widen <= 1:
        raise ValueError("widen must exceed 1")
    domain = problem.domain
    if probes is None:
        probes = [problem.initial.y0]
    points = as_states(np.asarray(probes, dtype=float), problem.dim)
    wide_problem = problem.with_domain(domain.widened(widen))
    n_space = int(round((grid.n_space - 1) * widen)) + 1
    wide_grid = Grid.build(wide_problem, grid.n_time, n_space, grid.refinement_ratio, grid.n_refine)
    t0 = problem.initial.t0
    base = solve_v(problem, grid, **solver_options).query(t0, points)
    wide = solve_v(wide_problem, wide_grid, **solver_options).query(t0, points)
    result = BoxSensitivity(widen, points, np.atleast_1d(base), np.atleast_1d(wide))
    logger.info("Box sensitivity (x%s): max |dv| = %.3g", widen, result.max_difference)
    return result


@dataclass(frozen=True)
class RefinementStudy:
    n_time: Tuple[int, ...]
    n_space: Tuple[int, ...]
    values: Tuple[float, ...]
    errors: Tuple[float, ...]
    orders: Tuple[float, ...] = field(default=())


def refinement_study(
    problem: LiquidationProblem,
    grid: Grid,
    oracle: float,
    levels: int = 2,
    point: Optional[Sequence[float]] = None,
    **solver_options: float,
) -> RefinementStudy:
    """Errors of v(t0, y) against an oracle value on successively halved meshes."""
    y = problem.initial.y0 if point is None else point
    n_time, n_space, values, errors = [], [], [], []
    current = grid
    for _ in range(levels):
        value = float(solve_v(problem, current, **solver_options).query(problem.initial.t0, y))
        n_time.append(current.n_time)
        n_space.append(current.n_space)
        values.append(value)
        errors.append(abs(value - oracle))
        current = current.refined(problem)
    orders = tuple(
        math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(errors, errors[1:])
    )
    return RefinementStudy(tuple(n_time), tuple(n_space), tuple(values), tuple(errors), orders)
