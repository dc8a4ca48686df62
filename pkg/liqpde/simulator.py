# Copyright (c) 2026 liqpde developers
# MIT License

"""
Monte-Carlo simulation of the factor, the dark pool clock and the controlled
position under pluggable liquidation strategies.

Within a mesh step the factor is frozen at its left value. Steps are split at
the sampled fill times; each piece is integrated on a few sub-nodes that are
geometric in the remaining time tau = T - s, which makes the exponential
update X = X_a exp(-int rho) exact for rates proportional to 1/tau. The last
mesh step is a forced execution at the constant rate X / dt, reported apart.
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from liqpde import settings
from liqpde.exceptions import SurfaceRequired
from liqpde.hjb_core import feedback_kernel
from liqpde.model import CostModel, LiquidationProblem
from liqpde.pde_solver import ValueSurface
from liqpde.rng import path_streams

logger = logging.getLogger(__name__)

SUBSTEPS = 4

Streams = Union[np.random.Generator, Tuple[np.random.Generator, np.random.Generator]]


def simulation_mesh(
    t0: float,
    T: float,
    n_steps: int = 200,
    n_refine: int = 12,
    ratio: float = 0.5,
    checkpoints: Sequence[float] = (),
) -> np.ndarray:
    """Uniform mesh on [t0, T] with geometric refinement of the last step toward T."""
    if not t0 < T:
        raise ValueError(f"Empty simulation interval [{t0}, {T}]")
    uniform = np.linspace(t0, T, n_steps + 1)
    last = uniform[-1] - uniform[-2]
    refined = T - last * ratio ** np.arange(1, n_refine + 1)
    extra = [c for c in checkpoints if t0 < c < T]
    mesh = np.unique(np.concatenate([uniform, refined, extra]))
    keep = np.concatenate([[True], np.diff(mesh) > 1e-12 * (T - t0)])
    mesh = mesh[keep]
    mesh[-1] = T
    return mesh


def factor_paths(
    problem: LiquidationProblem, y0: Sequence[float], mesh: np.ndarray, normals: np.ndarray
) -> np.ndarray:
    """
    Euler-Maruyama paths of shape (paths, nodes, d) from standard normals of
    shape (paths, steps, noise_dim), reflected into the truncation box.
    """
    factor = problem.factor
    n_paths = normals.shape[0]
    paths = np.empty((n_paths, len(mesh), factor.dim))
    paths[:, 0] = np.asarray(y0, dtype=float)
    for k, dt in enumerate(np.diff(mesh)):
        y = paths[:, k]
        shock = np.einsum("pdn,pn->pd", factor.sigma(y), normals[:, k]) * np.sqrt(dt)
        paths[:, k + 1] = problem.domain.reflect(y + factor.b(y) * dt + shock)
    return paths


def _split(streams: Streams) -> Tuple[np.random.Generator, np.random.Generator]:
    if isinstance(streams, np.random.Generator):
        return streams, streams
    return streams


def simulate_factor(
    problem: LiquidationProblem,
    t0: float,
    y0: Sequence[float],
    mesh: np.ndarray,
    rng_stream: Streams,
) -> np.ndarray:
    mesh = np.asarray(mesh, dtype=float)
    if mesh[0] < t0 or mesh[-1] > problem.horizon:
        raise ValueError("Mesh must lie inside [t0, T]")
    noise, _ = _split(rng_stream)
    normals = noise.standard_normal((1, len(mesh) - 1, problem.factor.noise_dim))
    return factor_paths(problem, y0, mesh, normals)[0]


def sample_fill_times(theta: float, t0: float, T: float, rng_stream: Streams) -> np.ndarray:
    """Jump times in [t0, T) of a Poisson clock with intensity theta."""
    if theta < 0:
        raise ValueError(f"Intensity must be nonnegative, got {theta}")
    if theta == 0:
        return np.empty(0)
    _, clock = _split(rng_stream)
    times = []
    s = t0 + clock.exponential(1.0 / theta)
    while s < T:
        times.append(s)
        s += clock.exponential(1.0 / theta)
    return np.asarray(times)


class Strategy(ABC):
    """
    Liquidation strategy. Multiplicative strategies trade at rate rho * X and
    post the fraction `post_fraction` of the pre-jump position; additive ones
    trade at an absolute rate.
    """

    tag: str
    multiplicative = True

    def rate_factor(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rate(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def post_fraction(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...


class _SurfaceFeedback(Strategy):
    def __init__(self, surface: Optional[ValueSurface]) -> None:
        if surface is None:
            raise SurfaceRequired(f"Strategy {self.tag!r} needs a value surface")
        self.surface = surface
        self.costs = surface.problem.costs

    def _controls(self, s: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v = self.surface.query(s, y)
        return feedback_kernel(v, self.costs.eta(y), self.costs.gamma(y), self.costs.beta, 1.0)

    def rate_factor(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self._controls(s, y)[0]


class OptimalFeedback(_SurfaceFeedback):
    tag = "optimal"

    def post_fraction(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self._controls(s, y)[1]


class PrimaryOnlyFeedback(_SurfaceFeedback):
    tag = "primary_only"

    def post_fraction(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.zeros(len(y))


class Twap(Strategy):
    tag = "twap"

    def __init__(self, horizon: float) -> None:
        self.horizon = horizon

    def rate_factor(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(1.0 / (self.horizon - np.asarray(s, dtype=float)), (len(y),))

    def post_fraction(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.zeros(len(y))


class CustomRateTable(Strategy):
    """Piecewise constant absolute rates and posting fractions starting at each knot."""

    tag = "custom"
    multiplicative = False

    def __init__(
        self,
        knots: Sequence[float],
        rates: Sequence[float],
        post_fractions: Optional[Sequence[float]] = None,
    ) -> None:
        self.knots = np.asarray(knots, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        self.fractions = (
            np.zeros_like(self.rates) if post_fractions is None else np.asarray(post_fractions, dtype=float)
        )
        if not len(self.knots) == len(self.rates) == len(self.fractions):
            raise ValueError("Rate table needs one rate and one posting fraction per knot")

    def _piece(self, s: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, len(self.knots) - 1)

    def rate(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.rates[self._piece(s)], (len(y),))

    def post_fraction(self, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.fractions[self._piece(s)], (len(y),))


def make_strategy(
    tag: str, problem: LiquidationProblem, surface: Optional[ValueSurface] = None, **params: Any
) -> Strategy:
    if tag == "optimal":
        return OptimalFeedback(surface)
    if tag == "primary_only":
        return PrimaryOnlyFeedback(surface)
    if tag == "twap":
        return Twap(problem.horizon)
    if tag == "custom":
        missing = [key for key in ("knots", "rates") if key not in params]
        if missing:
            raise ValueError(f"Strategy 'custom' needs a rate table, missing: {', '.join(missing)}")
        return CustomRateTable(**params)
    raise ValueError(f"Unknown strategy: {tag!r}")


@dataclass(frozen=True, eq=False)
class ControlRecord:
    """
    Controls of one path on a mesh: an average rate per interval and the dark
    pool fills, placed at the end of their interval in order. Coefficients are
    frozen per interval.
    """

    times: np.ndarray
    x0: float
    rates: np.ndarray
    fill_interval: np.ndarray
    fill_sizes: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    p: float

    def _fill_totals(self, sizes: np.ndarray) -> np.ndarray:
        totals = np.zeros(len(self.rates))
        np.add.at(totals, self.fill_interval, sizes)
        return totals

    def positions(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node positions and the pre-fill positions at the end of each interval."""
        dt = np.diff(self.times)
        moves = self.rates * dt + self._fill_totals(self.fill_sizes)
        nodes = self.x0 - np.concatenate([[0.0], np.cumsum(moves)])
        return nodes, nodes[:-1] - self.rates * dt

    def cost(self) -> float:
        dt = np.diff(self.times)
        nodes, pre = self.positions()
        p = self.p
        impact = np.sum(self.eta * np.abs(self.rates) ** p * dt)
        dark = np.sum(self.gamma[self.fill_interval] * np.abs(self.fill_sizes) ** p)
        risk = np.sum(self.lam * 0.5 * (np.abs(nodes[:-1]) ** p + np.abs(pre) ** p) * dt)
        return float(impact + dark + risk)

    def is_monotone(self, tol: float = 1e-12) -> bool:
        nodes, pre = self.positions()
        sign = 1.0 if self.x0 >= 0 else -1.0
        path = sign * np.column_stack([nodes[:-1], pre]).ravel()
        path = np.append(path, sign * nodes[-1])
        return bool(np.all(np.diff(path) <= tol) and np.all(path >= -tol))


def monotone_reduction(record: ControlRecord) -> ControlRecord:
    """
    Keep only selling rates and fills, never beyond the remaining position:
    rate -> min(rate^+, X / dt), fill -> min(fill^+, X_-). Mirrored for short
    positions. Never increases the pathwise cost.
    """
    sign = 1.0 if record.x0 >= 0 else -1.0
    dt = np.diff(record.times)
    rates = sign * record.rates
    sizes = sign * record.fill_sizes
    order = np.argsort(record.fill_interval, kind="stable")
    new_rates = np.zeros_like(rates)
    new_sizes = np.zeros_like(sizes)
    x = sign * record.x0
    cursor = 0
    for k in range(len(rates)):
        if x > 0:
            new_rates[k] = min(max(rates[k], 0.0), x / dt[k])
            x = max(x - new_rates[k] * dt[k], 0.0)
        while cursor < len(order) and record.fill_interval[order[cursor]] == k:
            f = order[cursor]
            if x > 0:
                new_sizes[f] = min(max(sizes[f], 0.0), x)
                x = max(x - new_sizes[f], 0.0)
            cursor += 1
    return replace(record, rates=sign * new_rates, fill_sizes=sign * new_sizes)


@dataclass(frozen=True, eq=False)
class PathResult:
    times: np.ndarray
    factor: np.ndarray
    position: np.ndarray
    xi: np.ndarray
    pi: np.ndarray
    running_cost: np.ndarray
    fill_times: np.ndarray
    fill_sizes: np.ndarray
    impact_cost: float
    risk_cost: float
    dark_cost: float
    dark_intensity_cost: float
    forced_cost: float
    pre_terminal: float

    @property
    def cost(self) -> float:
        return self.impact_cost + self.risk_cost + self.dark_cost + self.forced_cost

    @property
    def terminal_position(self) -> float:
        return float(self.position[-1])

    def fill_flags(self) -> np.ndarray:
        """1 at nodes that close an interval containing a fill."""
        flags = np.zeros(len(self.times), dtype=int)
        index = np.searchsorted(self.times, self.fill_times, side="left")
        flags[np.clip(index, 0, len(self.times) - 1)] = 1
        return flags

    def controls(self, costs: CostModel) -> ControlRecord:
        dt = np.diff(self.times)
        interval = np.clip(np.searchsorted(self.times, self.fill_times, side="right") - 1, 0, len(dt) - 1)
        fills = np.zeros(len(dt))
        np.add.at(fills, interval, self.fill_sizes)
        rates = (self.position[:-1] - self.position[1:] - fills) / dt
        left = self.factor[:-1]
        return ControlRecord(
            times=self.times,
            x0=float(self.position[0]),
            rates=rates,
            fill_interval=interval,
            fill_sizes=self.fill_sizes,
            eta=costs.eta(left),
            lam=costs.lam(left),
            gamma=costs.gamma(left),
            p=costs.p,
        )


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Batched path results; row i is the path with stream index i."""

    times: np.ndarray
    factor: np.ndarray
    position: np.ndarray
    xi: np.ndarray
    pi: np.ndarray
    running_cost: np.ndarray
    fill_times: np.ndarray
    fill_sizes: np.ndarray
    impact: np.ndarray
    risk: np.ndarray
    dark_fills: np.ndarray
    dark_intensity: np.ndarray
    forced: np.ndarray
    pre_terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.position)

    @property
    def cost(self) -> np.ndarray:
        return self.impact + self.risk + self.dark_fills + self.forced

    def __getitem__(self, i: int) -> PathResult:
        filled = ~np.isnan(self.fill_times[i])
        return PathResult(
            times=self.times,
            factor=self.factor[i],
            position=self.position[i],
            xi=self.xi[i],
            pi=self.pi[i],
            running_cost=self.running_cost[i],
            fill_times=self.fill_times[i][filled],
            fill_sizes=self.fill_sizes[i][filled],
            impact_cost=float(self.impact[i]),
            risk_cost=float(self.risk[i]),
            dark_cost=float(self.dark_fills[i]),
            dark_intensity_cost=float(self.dark_intensity[i]),
            forced_cost=float(self.forced[i]),
            pre_terminal=float(self.pre_terminal[i]),
        )

    @classmethod
    def concatenate(cls, parts: Sequence["PathEnsemble"]) -> "PathEnsemble":
        width = max(part.fill_times.shape[1] for part in parts)

        def pad(a: np.ndarray) -> np.ndarray:
            return np.pad(a, ((0, 0), (0, width - a.shape[1])), constant_values=np.nan)

        return cls(
            times=parts[0].times,
            factor=np.concatenate([q.factor for q in parts]),
            position=np.concatenate([q.position for q in parts]),
            xi=np.concatenate([q.xi for q in parts]),
            pi=np.concatenate([q.pi for q in parts]),
            running_cost=np.concatenate([q.running_cost for q in parts]),
            fill_times=np.concatenate([pad(q.fill_times) for q in parts]),
            fill_sizes=np.concatenate([pad(q.fill_sizes) for q in parts]),
            impact=np.concatenate([q.impact for q in parts]),
            risk=np.concatenate([q.risk for q in parts]),
            dark_fills=np.concatenate([q.dark_fills for q in parts]),
            dark_intensity=np.concatenate([q.dark_intensity for q in parts]),
            forced=np.concatenate([q.forced for q in parts]),
            pre_terminal=np.concatenate([q.pre_terminal for q in parts]),
        )


@dataclass
class _Segment:
    x_end: np.ndarray
    impact: np.ndarray
    risk: np.ndarray
    dark_intensity: np.ndarray


def _multiplicative_segment(
    strategy: Strategy,
    T: float,
    a: np.ndarray,
    b: np.ndarray,
    y: np.ndarray,
    x: np.ndarray,
    eta: np.ndarray,
    lam: np.ndarray,
    gamma: np.ndarray,
    theta: float,
    p: float,
) -> _Segment:
    grid = np.linspace(0.0, 1.0, SUBSTEPS + 1)
    tau_a = T - a
    taus = tau_a[:, None] * ((T - b) / tau_a)[:, None] ** grid
    clock = -np.log(taus)  # ds = tau d(-log tau)
    nodes = T - taus
    rho = np.column_stack([strategy.rate_factor(nodes[:, i], y) for i in range(SUBSTEPS + 1)])
    frac = np.column_stack([strategy.post_fraction(nodes[:, i], y) for i in range(SUBSTEPS + 1)])
    decay = cumulative_trapezoid(rho * taus, clock, axis=1, initial=0.0)
    xs = x[:, None] * np.exp(-decay)
    impact = trapezoid(eta[:, None] * np.abs(rho * xs) ** p * taus, clock, axis=1)
    risk = trapezoid(lam[:, None] * np.abs(xs) ** p * taus, clock, axis=1)
    dark = trapezoid(theta * gamma[:, None] * np.abs(frac * xs) ** p * taus, clock, axis=1)
    return _Segment(xs[:, -1], impact, risk, dark)


def _additive_segment(
    strategy: Strategy,
    T: float,
    a: np.ndarray,
    b: np.ndarray,
    y: np.ndarray,
    x: np.ndarray,
    eta: np.ndarray,
    lam: np.ndarray,
    gamma: np.ndarray,
    theta: float,
    p: float,
) -> _Segment:
    grid = np.linspace(0.0, 1.0, SUBSTEPS + 1)
    nodes = a[:, None] + (b - a)[:, None] * grid
    rate = strategy.rate(a, y)
    frac = np.column_stack([strategy.post_fraction(nodes[:, i], y) for i in range(SUBSTEPS + 1)])
    xs = x[:, None] - rate[:, None] * (nodes - a[:, None])
    impact = eta * np.abs(rate) ** p * (b - a)
    risk = trapezoid(lam[:, None] * np.abs(xs) ** p, nodes, axis=1)
    dark = trapezoid(theta * gamma[:, None] * np.abs(frac * xs) ** p, nodes, axis=1)
    return _Segment(xs[:, -1], impact, risk, dark)


def _simulate_batch(
    problem: LiquidationProblem,
    strategy: Strategy,
    mesh: np.ndarray,
    normals: np.ndarray,
    fills: np.ndarray,
) -> PathEnsemble:
    """Run one batch; `fills` holds sampled fill times padded with +inf."""
    costs = problem.costs
    T = problem.horizon
    p = costs.p
    n_paths, n_nodes = normals.shape[0], len(mesh)
    factor = factor_paths(problem, problem.initial.y0, mesh, normals)
    segment = _multiplicative_segment if strategy.multiplicative else _additive_segment

    position = np.empty((n_paths, n_nodes))
    position[:, 0] = problem.initial.x0
    xi = np.zeros((n_paths, n_nodes))
    pi = np.zeros((n_paths, n_nodes))
    running = np.zeros((n_paths, n_nodes))
    impact, risk, dark, dark_intensity = (np.zeros(n_paths) for _ in range(4))
    width = fills.shape[1]
    fill_times = np.full((n_paths, width), np.nan)
    fill_sizes = np.full((n_paths, width), np.nan)
    next_fill = np.zeros(n_paths, dtype=int)
    rows = np.arange(n_paths)
    padded = np.concatenate([fills, np.full((n_paths, 1), np.inf)], axis=1)

    x = position[:, 0].copy()
    for k in range(n_nodes - 2):
        a0, b0 = mesh[k], mesh[k + 1]
        y = factor[:, k]
        eta, lam, gamma = costs.eta(y), costs.lam(y), costs.gamma(y)
        here = np.full(n_paths, a0)
        if strategy.multiplicative:
            xi[:, k] = strategy.rate_factor(here, y) * x
        else:
            xi[:, k] = strategy.rate(here, y)
        pi[:, k] = strategy.post_fraction(here, y) * x

        start = here
        while True:
            upcoming = padded[rows, next_fill]
            is_fill = upcoming <= b0
            end = np.where(is_fill, upcoming, b0)
            moving = np.flatnonzero(end > start)
            if len(moving):
                piece = segment(
                    strategy,
                    T,
                    start[moving],
                    end[moving],
                    y[moving],
                    x[moving],
                    eta[moving],
                    lam[moving],
                    gamma[moving],
                    costs.theta,
                    p,
                )
                x[moving] = piece.x_end
                impact[moving] += piece.impact
                risk[moving] += piece.risk
                dark_intensity[moving] += piece.dark_intensity
            jumping = np.flatnonzero(is_fill)
            if not len(jumping):
                break
            # posted size uses the pre-jump position
            size = strategy.post_fraction(end[jumping], y[jumping]) * x[jumping]
            slot = next_fill[jumping]
            fill_times[jumping, slot] = end[jumping]
            fill_sizes[jumping, slot] = size
            dark[jumping] += gamma[jumping] * np.abs(size) ** p
            x[jumping] -= size
            next_fill[jumping] += 1
            start = end
        position[:, k + 1] = x
        running[:, k + 1] = impact + risk + dark

    dt = mesh[-1] - mesh[-2]
    y = factor[:, -2]
    pre_terminal = np.abs(x)
    forced = costs.eta(y) * pre_terminal**p * dt ** (1 - p) + costs.lam(y) * pre_terminal**p * dt / (p + 1)
    xi[:, -2] = x / dt
    position[:, -1] = 0.0
    running[:, -1] = running[:, -2] + forced
    return PathEnsemble(
        times=mesh,
        factor=factor,
        position=position,
        xi=xi,
        pi=pi,
        running_cost=running,
        fill_times=fill_times,
        fill_sizes=fill_sizes,
        impact=impact,
        risk=risk,
        dark_fills=dark,
        dark_intensity=dark_intensity,
        forced=forced,
        pre_terminal=pre_terminal,
    )


def _draws(
    problem: LiquidationProblem, mesh: np.ndarray, streams: Sequence[Streams]
) -> Tuple[np.ndarray, np.ndarray]:
    noise_dim = problem.factor.noise_dim
    normals = np.empty((len(streams), len(mesh) - 1, noise_dim))
    clocks = []
    for i, pair in enumerate(streams):
        noise, clock = _split(pair)
        normals[i] = noise.standard_normal((len(mesh) - 1, noise_dim))
        clocks.append(sample_fill_times(problem.costs.theta, mesh[0], problem.horizon, clock))
    width = max((len(c) for c in clocks), default=0)
    fills = np.full((len(streams), width), np.inf)
    for i, c in enumerate(clocks):
        fills[i, : len(c)] = c
    return normals, fills


def _resolve(
    strategy: Union[str, Strategy], problem: LiquidationProblem, surface: Optional[ValueSurface]
) -> Strategy:
    return make_strategy(strategy, problem, surface) if isinstance(strategy, str) else strategy


def run_strategy(
    problem: LiquidationProblem,
    strategy: Union[str, Strategy],
    mesh: np.ndarray,
    rng_stream: Streams,
    surface: Optional[ValueSurface] = None,
) -> PathResult:
    """Simulate a single path from (t0, y0, x0) with the given noise and clock streams."""
    strategy = _resolve(strategy, problem, surface)
    mesh = np.asarray(mesh, dtype=float)
    if mesh[-1] != problem.horizon:
        raise ValueError("Simulation mesh must end at T")
    normals, fills = _draws(problem, mesh, [rng_stream])
    return _simulate_batch(problem, strategy, mesh, normals, fills)[0]


def simulate_ensemble(
    problem: LiquidationProblem,
    strategy: Union[str, Strategy],
    mesh: np.ndarray,
    n_paths: int,
    seed: int,
    surface: Optional[ValueSurface] = None,
    batch_size: Optional[int] = None,
    workers: int = 1,
) -> PathEnsemble:
    """Paths 0..n_paths-1, each on its own (seed, index) streams."""
    strategy = _resolve(strategy, problem, surface)
    batch_size = batch_size or settings.BATCH_SIZE
    batches = [range(i, min(i + batch_size, n_paths)) for i in range(0, n_paths, batch_size)]

    def work(indices: range) -> PathEnsemble:
        normals, fills = _draws(problem, mesh, [path_streams(seed, i) for i in indices])
        return _simulate_batch(problem, strategy, mesh, normals, fills)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(work, batches))
    return PathEnsemble.concatenate(parts)


@dataclass(frozen=True)
class CostEstimate:
    strategy: str
    mean: float
    se: float
    mean_pre_terminal: float
    forced_share: float
    dark_fills: float
    dark_intensity: float
    dark_gap_se: float
    n_paths: int
    seed: int


def summarize(tag: str, ensemble: PathEnsemble, seed: int) -> CostEstimate:
    n = len(ensemble)
    cost = ensemble.cost
    mean = float(np.mean(cost))
    gap = ensemble.dark_fills - ensemble.dark_intensity
    return CostEstimate(
        strategy=tag,
        mean=mean,
        se=float(np.std(cost, ddof=1) / np.sqrt(n)),
        mean_pre_terminal=float(np.mean(ensemble.pre_terminal)),
        forced_share=float(np.mean(ensemble.forced) / mean) if mean > 0 else 0.0,
        dark_fills=float(np.mean(ensemble.dark_fills)),
        dark_intensity=float(np.mean(ensemble.dark_intensity)),
        dark_gap_se=float(np.std(gap, ddof=1) / np.sqrt(n)),
        n_paths=n,
        seed=seed,
    )


def estimate_cost(
    problem: LiquidationProblem,
    strategy: Union[str, Strategy],
    surface: Optional[ValueSurface] = None,
    n_paths: int = 10_000,
    seed: int = 0,
    mesh: Optional[np.ndarray] = None,
    batch_size: Optional[int] = None,
    workers: int = 1,
) -> CostEstimate:
    if n_paths < 2:
        raise ValueError("At least two paths are required for a standard error")
    strategy = _resolve(strategy, problem, surface)
    if mesh is None:
        mesh = simulation_mesh(problem.initial.t0, problem.horizon)
    ensemble = simulate_ensemble(problem, strategy, mesh, n_paths, seed, surface, batch_size, workers)
    estimate = summarize(strategy.tag, ensemble, seed)
    logger.info(
        "%s: mean cost %.6g +- %.2g over %s paths (forced share %.3g)",
        estimate.strategy,
        estimate.mean,
        estimate.se,
        n_paths,
        estimate.forced_share,
    )
    return estimate


def decay_envelope(path: PathResult, costs: CostModel, theta: Optional[float] = None) -> np.ndarray:
    """
    |x0| ((T - s)/(T - t0))^(1/k) with k = sup eta^beta * sup eta^-beta * e^(beta theta (T - t0))
    over the realized factor path.
    """
    theta = costs.theta if theta is None else theta
    beta = costs.beta
    t0, T = path.times[0], path.times[-1]
    eta = costs.eta(path.factor)
    kappa = (eta.max() / eta.min()) ** beta * np.exp(beta * theta * (T - t0))
    return abs(path.position[0]) * ((T - path.times) / (T - t0)) ** (1.0 / kappa)


def strategies_for(
    tags: Sequence[str], problem: LiquidationProblem, surface: Optional[ValueSurface]
) -> List[Strategy]:
    return [make_strategy(tag, problem, surface) for tag in tags]
