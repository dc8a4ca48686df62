import hashlib
import json
from importlib import metadata

import numpy as np
import pytest
from mock import patch

from liqpde.pde_solver import contraction_certificate
from liqpde.probabilistic_bounds import BoundEstimate, BoundsReport, ProbeVerdict
from liqpde.reports import (
    bounds_frame,
    build_manifest,
    certificate_frame,
    config_hash,
    library_versions,
    picard_frame,
    surface_frame,
    write_frame,
    write_manifest,
)


def test_surface_frame(coth_surface):
    frame = surface_frame(coth_surface)
    assert list(frame.columns) == ["t", "y", "u", "v"]
    assert len(frame) == (len(coth_surface.grid.time_nodes) - 1) * 11
    assert frame["t"].iloc[0] == 0.0
    assert frame["t"].max() < 1.0
    assert frame["y"].iloc[:11].tolist() == pytest.approx(np.linspace(-1.0, 1.0, 11))


def test_write_frame_format(coth_problem, tmp_path):
    frame = certificate_frame(contraction_certificate(coth_problem))
    path = write_frame(frame, tmp_path / "nested" / "certificate.csv")
    text = path.read_bytes().decode()
    assert "\r" not in text
    header, row = text.splitlines()
    assert header == "M,R,L,delta,degenerate,max_observed_factor,left_ball"
    assert row == "1,2,4,0.125,False,,False"


def test_bounds_frame():
    bounds = BoundEstimate(0.5, (0.25, -1.0), 1.0, 0.01, 2.0, 0.02, 100, 7)
    frame = bounds_frame(BoundsReport([ProbeVerdict(bounds, 1.5, True), ProbeVerdict(bounds, 3.0, False)]))
    assert frame["probe"].tolist() == ["t=0.5 y=(0.25 -1)"] * 2
    assert frame["verdict"].tolist() == ["pass", "fail"]
    assert list(frame.columns) == ["probe", "lower", "se_lower", "v", "upper", "se_upper", "verdict"]


def test_picard_frame():
    frame = picard_frame([1.0, 0.5, 0.2], [0.5, 0.4])
    assert frame["iteration"].tolist() == [1, 2, 3]
    assert np.isnan(frame["factor"].iloc[0])
    assert frame["factor"].iloc[1:].tolist() == [0.5, 0.4]


def test_config_hash():
    assert config_hash("seed = 1\n") == hashlib.sha256(b"seed = 1\n").hexdigest()


def test_library_versions_missing_package():
    with patch("liqpde.reports.metadata.version") as version:
        version.side_effect = metadata.PackageNotFoundError("liqpde")
        assert library_versions(["liqpde"]) == {"liqpde": "unknown"}


def test_manifest(tmp_path):
    manifest = build_manifest(
        "certificate",
        "[problem]\n",
        20240101,
        True,
        [tmp_path / "picard.csv", tmp_path / "certificate.csv"],
        {"delta": np.float64(0.125)},
    )
    assert manifest["artifacts"] == ["certificate.csv", "picard.csv"]
    assert manifest["config_sha256"] == config_hash("[problem]\n")
    assert manifest["created_at"].endswith("+00:00")
    path = write_manifest(manifest, tmp_path / "manifest.json")
    loaded = json.loads(path.read_text())
    assert loaded["details"] == {"delta": 0.125}
    assert loaded["passed"] is True
    assert "numpy" in loaded["versions"]


def test_manifest_copies_details():
    details = {"delta": 0.125}
    manifest = build_manifest("certificate", "", 1, True, [], details)
    details["manifest"] = manifest
    assert manifest["details"] == {"delta": 0.125}
    json.dumps(manifest)
