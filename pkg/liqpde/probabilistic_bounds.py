# Copyright (c) 2026 liqpde developers
# MIT License

"""
Feynman-Kac estimates of the a priori bounds on v,

    e^(-theta tau) / E[int_t^T eta(Y_s)^(-beta) ds]^(1/beta)
        <= v(t, y) <=
    tau^(-p) E[int_t^T eta(Y_s) + (T - s)^p lambda(Y_s) ds],

and the residual cost diagnostic E[v(s, Y_s) |X_s|^p] along simulated paths.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from liqpde import settings
from liqpde.model import LiquidationProblem
from liqpde.pde_solver import ValueSurface
from liqpde.rng import path_streams
from liqpde.simulator import PathEnsemble, PathResult, factor_paths

logger = logging.getLogger(__name__)

SLACK = 3.0


@dataclass(frozen=True)
class BoundEstimate:
    t: float
    y: Tuple[float, ...]
    lower: float
    se_lower: float
    upper: float
    se_upper: float
    n_paths: int
    seed: int

    @property
    def consistent(self) -> bool:
        return self.lower <= self.upper + SLACK * math.hypot(self.se_lower, self.se_upper)


def _path_integrals(
    problem: LiquidationProblem, mesh: np.ndarray, y: Sequence[float], seed: int, indices: range
) -> Tuple[np.ndarray, np.ndarray]:
    costs = problem.costs
    normals = np.stack(
        [
            path_streams(seed, i)[0].standard_normal((len(mesh) - 1, problem.factor.noise_dim))
            for i in indices
        ]
    )
    paths = factor_paths(problem, y, mesh, normals)
    eta = costs.eta(paths)
    weight = (problem.horizon - mesh) ** costs.p
    inverse = trapezoid(eta ** (-costs.beta), mesh, axis=1)
    running = trapezoid(eta + weight * costs.lam(paths), mesh, axis=1)
    return inverse, running


def _bounds(
    problem: LiquidationProblem,
    t: float,
    y: Sequence[float],
    n_paths: int,
    seed: int,
    n_steps: int,
    batch_size: Optional[int],
    workers: int,
) -> BoundEstimate:
    if n_paths < 2:
        raise ValueError("At least two paths are required for a standard error")
    T = problem.horizon
    if not t < T:
        raise ValueError(f"Bounds need t < T, got t={t}, T={T}")
    tau = T - t
    mesh = np.linspace(t, T, n_steps + 1)
    batch_size = batch_size or settings.BATCH_SIZE
    batches = [range(i, min(i + batch_size, n_paths)) for i in range(0, n_paths, batch_size)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(lambda b: _path_integrals(problem, mesh, y, seed, b), batches))
    inverse = np.concatenate([part[0] for part in parts])
    running = np.concatenate([part[1] for part in parts])

    costs = problem.costs
    beta = costs.beta
    root_n = math.sqrt(n_paths)
    mean_inverse = np.sum(inverse) / n_paths
    se_inverse = float(np.std(inverse, ddof=1)) / root_n
    discount = math.exp(-costs.theta * tau)
    # delta method for a -> a^(-1/beta), with second order bias correction
    g = mean_inverse ** (-1.0 / beta)
    g1 = -(1.0 / beta) * mean_inverse ** (-1.0 / beta - 1.0)
    g2 = (1.0 / beta) * (1.0 / beta + 1.0) * mean_inverse ** (-1.0 / beta - 2.0)
    lower = discount * (g - 0.5 * g2 * se_inverse**2)
    se_lower = discount * abs(g1) * se_inverse

    scale = tau ** (-costs.p)
    upper = scale * np.sum(running) / n_paths
    se_upper = scale * float(np.std(running, ddof=1)) / root_n
    return BoundEstimate(
        t=float(t),
        y=tuple(float(v) for v in np.atleast_1d(y)),
        lower=float(lower),
        se_lower=se_lower,
        upper=float(upper),
        se_upper=se_upper,
        n_paths=n_paths,
        seed=seed,
    )


def estimate_bounds(
    problem: LiquidationProblem,
    t: float,
    y: Sequence[float],
    n_paths: int,
    seed: int,
    n_steps: int = 2000,
    batch_size: Optional[int] = None,
    workers: int = 1,
) -> BoundEstimate:
    estimate = _bounds(problem, t, y, n_paths, seed, n_steps, batch_size, workers)
    logger.debug(
        "Bounds at t=%s, y=%s: [%.6g +- %.2g, %.6g +- %.2g]",
        t,
        list(estimate.y),
        estimate.lower,
        estimate.se_lower,
        estimate.upper,
        estimate.se_upper,
    )
    return estimate


def bsde_bounds(
    problem: LiquidationProblem,
    t: float,
    y: Sequence[float],
    n_paths: int,
    seed: int,
    n_steps: int = 2000,
    batch_size: Optional[int] = None,
    workers: int = 1,
) -> BoundEstimate:
    """
    Bounds on the first component of the backward equation without passive
    orders, read in Markovian form as conditional expectations given Y_t = y.
    """
    if problem.costs.theta != 0:
        raise ValueError("The backward model has no passive orders; theta must be 0")
    return _bounds(problem, t, y, n_paths, seed, n_steps, batch_size, workers)


@dataclass(frozen=True)
class ProbeVerdict:
    bounds: BoundEstimate
    value: float
    passed: bool


@dataclass(frozen=True)
class BoundsReport:
    probes: List[ProbeVerdict]

    @property
    def violations(self) -> List[ProbeVerdict]:
        return [probe for probe in self.probes if not probe.passed]

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_surface_bounds(
    surface: ValueSurface,
    probes: Sequence[Tuple[float, Sequence[float]]],
    n_paths: int,
    seed: int,
    n_steps: int = 2000,
    rtol: float = 1e-6,
    batch_size: Optional[int] = None,
    workers: int = 1,
) -> BoundsReport:
    """Check lower - 3 se <= v(t, y) <= upper + 3 se at interior probes."""
    problem = surface.problem
    verdicts = []
    for t, y in probes:
        if not t < problem.horizon:
            raise ValueError(f"Probe time {t} is not before T={problem.horizon}")
        if not problem.domain.is_interior(y):
            raise ValueError(f"Probe {list(y)} is within 20% of the box boundary")
        bounds = estimate_bounds(problem, t, y, n_paths, seed, n_steps, batch_size, workers)
        value = float(surface.query(t, y))
        passed = (
            bounds.lower - SLACK * bounds.se_lower - rtol * abs(bounds.lower)
            <= value
            <= bounds.upper + SLACK * bounds.se_upper + rtol * abs(bounds.upper)
        )
        if not passed:
            logger.warning(
                "Bound violation at t=%s, y=%s: v=%.6g outside [%.6g, %.6g]",
                t,
                list(y),
                value,
                bounds.lower,
                bounds.upper,
            )
        verdicts.append(ProbeVerdict(bounds, value, passed))
    return BoundsReport(verdicts)


def halving_checkpoints(t0: float, T: float, count: int) -> np.ndarray:
    """s_k = T - (T - t0) 2^-k, k = 1..count."""
    return T - (T - t0) * 0.5 ** np.arange(1, count + 1)


@dataclass(frozen=True)
class ResidualCostReport:
    checkpoints: np.ndarray
    means: np.ndarray
    ses: np.ndarray
    decreasing: bool
    final_ratio: float

    @property
    def terminal(self) -> float:
        return float(self.means[-1])


def _as_ensemble(
    runs: Union[PathEnsemble, Sequence[PathResult]]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(runs, PathEnsemble):
        return runs.times, runs.factor, runs.position
    times = runs[0].times
    return times, np.stack([r.factor for r in runs]), np.stack([r.position for r in runs])


def residual_cost_diagnostic(
    surface: ValueSurface,
    strategy_runs: Union[PathEnsemble, Sequence[PathResult]],
    checkpoints: Sequence[float],
) -> ResidualCostReport:
    """E[v(s_k, Y_{s_k}) |X_{s_k}|^p] at checkpoints on the simulation mesh."""
    T = surface.horizon
    checkpoints = np.asarray(checkpoints, dtype=float)
    if np.any(checkpoints >= T):
        raise ValueError(f"Checkpoints must lie before T={T}")
    times, factor, position = _as_ensemble(strategy_runs)
    n = len(position)
    p = surface.problem.costs.p
    means, ses = [], []
    for s in checkpoints:
        hits = np.flatnonzero(np.isclose(times, s, rtol=0.0, atol=1e-12 * T))
        if not len(hits):
            raise ValueError(f"Checkpoint {s} is not a node of the simulation mesh")
        k = hits[0]
        residual = surface.query(s, factor[:, k]) * np.abs(position[:, k]) ** p
        means.append(float(np.sum(residual) / n))
        ses.append(float(np.std(residual, ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
    means_a, ses_a = np.asarray(means), np.asarray(ses)
    noise = SLACK * np.hypot(ses_a[1:], ses_a[:-1])
    decreasing = bool(np.all(np.diff(means_a) <= noise + 1e-12))
    final_ratio = float(means_a[-1] / means_a[0]) if means_a[0] > 0 else 0.0
    return ResidualCostReport(checkpoints, means_a, ses_a, decreasing, final_ratio)
