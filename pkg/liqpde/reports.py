# Copyright (c) 2026 liqpde developers
# MIT License

import hashlib
import json
import logging
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd
import pytz

from liqpde.pde_solver import AsymptoticsReport, BoxSensitivity, ContractionCertificate, ValueSurface
from liqpde.probabilistic_bounds import BoundsReport, ResidualCostReport
from liqpde.simulator import CostEstimate, PathResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
LIBRARIES = ("liqpde", "numpy", "scipy", "pandas", "pydantic", "SQLAlchemy")


def _state_columns(dim: int) -> List[str]:
    return ["y"] if dim == 1 else [f"y{i + 1}" for i in range(dim)]


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s (%s rows)", path, len(frame))
    return path


def surface_frame(surface: ValueSurface) -> pd.DataFrame:
    """Rows (t, y..., u, v) for every node with t < T, time-major."""
    times, u, v = surface.nodal_values()
    nodes = surface.grid.space_nodes
    n_space = len(nodes)
    data: Dict[str, np.ndarray] = {"t": np.repeat(times, n_space)}
    for name, column in zip(_state_columns(nodes.shape[1]), np.tile(nodes, (len(times), 1)).T):
        data[name] = column
    data["u"] = u.ravel()
    data["v"] = v.ravel()
    return pd.DataFrame(data)


def bounds_frame(report: BoundsReport) -> pd.DataFrame:
    rows = []
    for probe in report.probes:
        b = probe.bounds
        rows.append(
            {
                "probe": f"t={b.t:g} y=({' '.join(f'{v:g}' for v in b.y)})",
                "lower": b.lower,
                "se_lower": b.se_lower,
                "v": probe.value,
                "upper": b.upper,
                "se_upper": b.se_upper,
                "verdict": "pass" if probe.passed else "fail",
            }
        )
    return pd.DataFrame(rows, columns=["probe", "lower", "se_lower", "v", "upper", "se_upper", "verdict"])


def ensemble_frame(estimates: Sequence[CostEstimate], reference: float = np.nan) -> pd.DataFrame:
    frame = pd.DataFrame([vars(e) for e in estimates])
    frame["value_reference"] = reference
    return frame


def certificate_frame(
    certificate: ContractionCertificate, left_ball: bool = False
) -> pd.DataFrame:
    factors = certificate.observed_factors
    return pd.DataFrame(
        [
            {
                "M": certificate.M,
                "R": certificate.R,
                "L": certificate.L,
                "delta": certificate.delta,
                "degenerate": certificate.degenerate,
                "max_observed_factor": max(factors) if factors else np.nan,
                "left_ball": left_ball,
            }
        ]
    )


def picard_frame(distances: Sequence[float], factors: Sequence[float]) -> pd.DataFrame:
    padded = [np.nan] + list(factors)
    return pd.DataFrame(
        {
            "iteration": np.arange(1, len(distances) + 1),
            "distance": distances,
            "factor": padded[: len(distances)],
        }
    )


def asymptotics_frame(report: AsymptoticsReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "tau": report.taus,
            "deviation": report.deviations,
            "ratio": report.deviations / report.taus,
        }
    )


def box_frame(result: BoxSensitivity) -> pd.DataFrame:
    columns = _state_columns(result.probes.shape[1])
    frame = pd.DataFrame(result.probes, columns=columns)
    frame["v"] = result.base
    frame["v_widened"] = result.widened
    frame["widen"] = result.widen
    return frame


def residual_frame(report: ResidualCostReport) -> pd.DataFrame:
    return pd.DataFrame({"checkpoint": report.checkpoints, "mean": report.means, "se": report.ses})


def path_frame(path: PathResult) -> pd.DataFrame:
    data: Dict[str, np.ndarray] = {"t": path.times}
    for name, column in zip(_state_columns(path.factor.shape[1]), path.factor.T):
        data[name] = column
    data["X"] = path.position
    data["xi"] = path.xi
    data["pi"] = path.pi
    data["fill_flag"] = path.fill_flags()
    data["running_cost"] = path.running_cost
    return pd.DataFrame(data)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def library_versions(names: Iterable[str] = LIBRARIES) -> Dict[str, str]:
    versions = {}
    for name in names:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def build_manifest(
    experiment: str,
    config_text: str,
    seed: int,
    passed: bool,
    artifacts: Sequence[Path],
    details: Dict[str, Any],
) -> Dict[str, Any]:
    return {
        "experiment": experiment,
        "config_sha256": config_hash(config_text),
        "seed": seed,
        "passed": bool(passed),
        "artifacts": sorted(str(Path(a).name) for a in artifacts),
        "details": dict(details),
        "versions": library_versions(),
        "created_at": datetime.now(pytz.utc).isoformat(),
    }


def write_manifest(manifest: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return path
