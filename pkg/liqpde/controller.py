# Copyright (c) 2026 liqpde developers
# MIT License

"""
Named experiments run against one configuration. Each experiment writes its
CSV artifacts and a manifest into its own directory and reports whether its
verification thresholds hold.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from liqpde import reports, settings
from liqpde.data_models import EXPERIMENT_NAMES, ExperimentConfig, load_config, parse_config
from liqpde.exceptions import ConfigError, LiquidationError, UnknownExperiment
from liqpde.model import LiquidationProblem, build_problem
from liqpde.pde_solver import (
    Grid,
    ValueSurface,
    box_sensitivity,
    check_asymptotics,
    contraction_certificate,
    picard_run,
    solve_v,
)
from liqpde.probabilistic_bounds import (
    halving_checkpoints,
    residual_cost_diagnostic,
    verify_surface_bounds,
)
from liqpde.simulator import (
    estimate_cost,
    make_strategy,
    simulate_ensemble,
    simulation_mesh,
    summarize,
)

logger = logging.getLogger(__name__)

PICARD_ITERATIONS = 8
CONTRACTION_SLACK = 0.05
COST_ALLOWANCE = 1e-2
FORCED_SHARE_LIMIT = 0.01
RESIDUAL_LIMIT = 0.05
ASYMPTOTIC_SLOPE = 0.9
GAP_SE = 3.0


@dataclass
class ExperimentOutcome:
    name: str
    passed: bool
    artifacts: List[Path] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    n_paths: Optional[int] = None
    manifest: Dict[str, Any] = field(default_factory=dict)


class ExperimentContext:
    """Lazily built problem, grid and value surface shared by the experiments of one run."""

    def __init__(self, config: ExperimentConfig, config_text: str, out_dir: Path) -> None:
        self.config = config
        self.config_text = config_text
        self.out_dir = out_dir
        self._problem: Optional[LiquidationProblem] = None
        self._grid: Optional[Grid] = None
        self._surface: Optional[ValueSurface] = None

    @property
    def problem(self) -> LiquidationProblem:
        if self._problem is None:
            self._problem = build_problem(self.config.problem)
        return self._problem

    @property
    def grid(self) -> Grid:
        if self._grid is None:
            g = self.config.grid
            self._grid = Grid.build(self.problem, g.n_time, g.n_space, g.refinement_ratio, g.n_refine)
        return self._grid

    @property
    def solver_options(self) -> Dict[str, float]:
        g = self.config.grid
        return {"solver_tol": g.solver_tol, "max_sweeps": g.max_sweeps, "min_step": g.min_step}

    @property
    def surface(self) -> ValueSurface:
        if self._surface is None:
            self._surface = solve_v(
                self.problem, self.grid, self.config.grid.series_tol, **self.solver_options
            )
        return self._surface

    @property
    def reference_value(self) -> float:
        """v(t0, y0) |x0|^p from the solved surface."""
        initial = self.problem.initial
        value = float(self.surface.query(initial.t0, initial.y0))
        return value * abs(initial.x0) ** self.problem.costs.p

    def mesh(self, checkpoints: Sequence[float] = ()) -> np.ndarray:
        s = self.config.simulation
        return simulation_mesh(
            self.problem.initial.t0,
            self.problem.horizon,
            s.n_steps,
            s.n_refine,
            s.refinement_ratio,
            checkpoints,
        )

    def probes(self) -> List[Tuple[float, List[float]]]:
        configured = self.config.simulation.probes
        if configured:
            return [(float(row[0]), [float(v) for v in row[1:]]) for row in configured]
        domain = self.problem.domain
        t0 = self.problem.initial.t0
        d = self.problem.dim
        if d == 1:
            fractions = np.linspace(0.25, 0.75, 5)[:, None]
        else:
            # centre, then each axis moved to 0.3 and 0.7 of its width
            shifted = [np.where(np.arange(d) == i, f, 0.5) for i in range(d) for f in (0.3, 0.7)]
            fractions = np.vstack([np.full(d, 0.5)] + shifted)
        return [(t0, [float(v) for v in domain.lower + f * domain.width]) for f in fractions]


def _solve(ctx: ExperimentContext, target: Path) -> ExperimentOutcome:
    surface = ctx.surface
    artifacts = [reports.write_frame(reports.surface_frame(surface), target / "surface.csv")]
    initial = ctx.problem.initial
    details: Dict[str, Any] = {
        "v_initial": float(surface.query(initial.t0, initial.y0)),
        "max_residual": surface.u_surface.max_residual,
    }
    if ctx.config.grid.box_sensitivity:
        result = box_sensitivity(ctx.problem, ctx.grid, **ctx.solver_options)
        artifacts.append(reports.write_frame(reports.box_frame(result), target / "box_sensitivity.csv"))
        details["box_max_difference"] = result.max_difference
    return ExperimentOutcome("solve", True, artifacts, details)


def _certificate(ctx: ExperimentContext, target: Path) -> ExperimentOutcome:
    certificate = contraction_certificate(ctx.problem, ctx.grid)
    run = picard_run(
        ctx.problem,
        ctx.grid,
        certificate.delta,
        PICARD_ITERATIONS,
        ctx.config.grid.series_tol,
        certificate=certificate,
    )
    artifacts = [
        reports.write_frame(
            reports.certificate_frame(run.certificate, run.left_ball), target / "certificate.csv"
        ),
        reports.write_frame(reports.picard_frame(run.distances, run.factors), target / "picard.csv"),
    ]
    worst = max(run.factors, default=0.0)
    passed = not run.left_ball and worst <= 0.5 + CONTRACTION_SLACK
    details = {
        "M": certificate.M,
        "R": certificate.R,
        "L": certificate.L,
        "delta": certificate.delta,
        "max_observed_factor": worst,
        "left_ball": run.left_ball,
    }
    return ExperimentOutcome("certificate", passed, artifacts, details)


def _asymptotics(ctx: ExperimentContext, target: Path) -> ExperimentOutcome:
    report = check_asymptotics(ctx.surface)
    artifacts = [reports.write_frame(reports.asymptotics_frame(report), target / "asymptotics.csv")]
    passed = report.exact or (report.slope >= ASYMPTOTIC_SLOPE and report.bounded)
    details = {
        "slope": None if math.isnan(report.slope) else report.slope,
        "exact": report.exact,
        "bounded": report.bounded,
        "max_ratio": report.max_ratio,
        "envelope_constant": report.envelope_constant,
    }
    return ExperimentOutcome("asymptotics", passed, artifacts, details)


def _verify_bounds(ctx: ExperimentContext, target: Path) -> ExperimentOutcome:
    s = ctx.config.simulation
    report = verify_surface_bounds(
        ctx.surface, ctx.probes(), s.bound_paths, s.seed, s.bound_steps, workers=s.workers
    )
    artifacts = [reports.write_frame(reports.bounds_frame(report), target / "bounds.csv")]
    details = {"probes": len(report.probes), "violations": len(report.violations)}
    return ExperimentOutcome("verify-bounds", report.passed, artifacts, details, s.bound_paths)


def _simulate(ctx: ExperimentContext, target: Path) -> ExperimentOutcome:
    s = ctx.config.simulation
    problem = ctx.problem
    checkpoints = halving_checkpoints(problem.initial.t0, problem.horizon, s.checkpoints)
    mesh = ctx.mesh(checkpoints)
    strategy = make_strategy("optimal", problem, ctx.surface)
    ensemble = simulate_ensemble(problem, strategy, mesh, s.n_paths, s.seed, workers=s.workers)
    estimate = summarize(strategy.tag, ensemble, s.seed)
    residual = residual_cost_diagnostic(ctx.surface, ensemble, checkpoints)
    reference = ctx.reference_value

    artifacts = [
        reports.write_frame(reports.ensemble_frame([estimate], reference), target / "ensemble.csv"),
        reports.write_frame(reports.residual_frame(residual), target / "residual_cost.csv"),
    ]
    for i in range(min(s.dump_paths, len(ensemble))):
        frame = reports.path_frame(ensemble[i])
        artifacts.append(reports.write_frame(frame, target / "paths" / f"path_{i:05d}.csv"))

    cost_ok = abs(estimate.mean - reference) <= 3 * estimate.se + COST_ALLOWANCE * abs(reference)
    forced_ok = estimate.forced_share <= FORCED_SHARE_LIMIT
    dark_ok = abs(estimate.dark_fills - estimate.dark_intensity) <= 3 * estimate.dark_gap_se + 1e-12
    residual_ok = residual.decreasing and (
        residual.means[0] == 0 or residual.final_ratio <= RESIDUAL_LIMIT
    )
    details = {
        "mean_cost": estimate.mean,
        "se": estimate.se,
        "reference": reference,
        "forced_share": estimate.forced_share,
        "mean_pre_terminal": estimate.mean_pre_terminal,
        "dark_fills": estimate.dark_fills,
        "dark_intensity": estimate.dark_intensity,
        "residual_final_ratio": residual.final_ratio,
        "cost_value_identity": cost_ok,
        "forced_share_ok": forced_ok,
        "dark_bookkeeping": dark_ok,
        "residual_decreasing": residual_ok,
    }
    passed = cost_ok and forced_ok and dark_ok and residual_ok
    return ExperimentOutcome("simulate", passed, artifacts, details, s.n_paths)


def _compare_strategies(ctx: ExperimentContext, target: Path) -> ExperimentOutcome:
    s = ctx.config.simulation
    mesh = ctx.mesh()
    estimates = [
        estimate_cost(
            ctx.problem,
            make_strategy(tag, ctx.problem, ctx.surface),
            n_paths=s.n_paths,
            seed=s.seed,
            mesh=mesh,
            workers=s.workers,
        )
        for tag in s.strategies
    ]
    artifacts = [
        reports.write_frame(
            reports.ensemble_frame(estimates, ctx.reference_value), target / "strategies.csv"
        )
    ]
    by_tag = {e.strategy: e for e in estimates}
    optimal = by_tag.get("optimal")
    gaps, strict = {}, {}
    passed = True
    if optimal is not None:
        for tag, e in by_tag.items():
            if tag == "optimal":
                continue
            gaps[tag] = e.mean - optimal.mean
            combined = GAP_SE * math.hypot(optimal.se, e.se)
            passed &= optimal.mean <= e.mean + combined
            if tag in s.strict_baselines:
                strict[tag] = bool(gaps[tag] > 0 and gaps[tag] >= combined)
                passed &= strict[tag]
    missing = [tag for tag in s.strict_baselines if tag not in strict]
    if missing:
        logger.warning("Strict baseline(s) not compared against the optimal strategy: %s", ", ".join(missing))
        passed = False
    details = {"means": {t: e.mean for t, e in by_tag.items()}, "gaps": gaps, "strict_gaps": strict}
    return ExperimentOutcome("compare-strategies", bool(passed), artifacts, details, s.n_paths)


EXPERIMENTS: Dict[str, Callable[[ExperimentContext, Path], ExperimentOutcome]] = {
    "solve": _solve,
    "simulate": _simulate,
    "verify-bounds": _verify_bounds,
    "certificate": _certificate,
    "asymptotics": _asymptotics,
    "compare-strategies": _compare_strategies,
}


def apply_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Re-validate the configuration with CLI overrides of scalar knobs."""
    raw = config.model_dump(by_alias=True)
    mapping = {
        "seed": ("simulation", "seed"),
        "paths": ("simulation", "n_paths"),
        "grid_nt": ("grid", "n_time"),
        "grid_ny": ("grid", "n_space"),
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "out_dir":
            raw["out_dir"] = str(value)
        elif key in mapping:
            section, name = mapping[key]
            raw[section][name] = value
        else:
            raise ConfigError(f"Unknown override: {key}")
    return parse_config(raw)


def run_experiment(ctx: ExperimentContext, name: str, output: Optional[str] = None) -> ExperimentOutcome:
    if name not in EXPERIMENTS:
        expected = ", ".join(EXPERIMENT_NAMES)
        raise UnknownExperiment(f"Unknown experiment: '{name}' (expected one of {expected})")
    target = ctx.out_dir / (output or name)
    logger.info("Running %s into %s", name, target)
    try:
        outcome = EXPERIMENTS[name](ctx, target)
    except LiquidationError as e:
        logger.error("Experiment %s failed: %s", name, e)
        outcome = ExperimentOutcome(name, False, details={"error": str(e)})
    manifest = reports.build_manifest(
        name,
        ctx.config_text,
        ctx.config.simulation.seed,
        outcome.passed,
        outcome.artifacts,
        outcome.details,
    )
    outcome.artifacts.append(reports.write_manifest(manifest, target / "manifest.json"))
    outcome.manifest = manifest
    return outcome


def run(
    config_path: Path,
    names: Sequence[str] = (),
    registry_url: Optional[str] = None,
    **overrides: Any,
) -> int:
    """
    Run the named experiments (or those listed in the configuration). Returns 0
    when every experiment passes, 1 when one fails and 2 on usage errors.
    """
    try:
        config = load_config(Path(config_path))
        config = apply_overrides(config, **overrides)
    except ConfigError as e:
        logger.error("%s", e)
        return 2

    requested = list(names) or [spec.name for spec in config.experiments]
    unknown = [n for n in requested if n not in EXPERIMENTS]
    if unknown:
        logger.error(
            "Unknown experiment(s): %s (expected one of %s)", ", ".join(unknown), ", ".join(EXPERIMENT_NAMES)
        )
        return 2
    if not requested:
        logger.error("No experiments requested")
        return 2

    outputs = {spec.name: spec.output for spec in config.experiments}
    out_dir = Path(config.out_dir or settings.OUT_DIR)
    ctx = ExperimentContext(config, Path(config_path).read_text(), out_dir)
    outcomes = [run_experiment(ctx, name, outputs.get(name)) for name in requested]

    if registry_url:
        from liqpde.registry import record_run, session_scope

        with session_scope(registry_url) as session:
            for outcome in outcomes:
                record_run(
                    session,
                    outcome.manifest,
                    str(out_dir / (outputs.get(outcome.name) or outcome.name)),
                    outcome.n_paths,
                )

    failed = [o.name for o in outcomes if not o.passed]
    for name in failed:
        logger.error("Experiment %s did not pass its thresholds", name)
    if not failed:
        logger.info("All %s experiment(s) passed", len(outcomes))
    return 1 if failed else 0
