import importlib

import pytest

from liqpde import settings
from liqpde.simulator import simulate_ensemble, simulation_mesh


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("LIQPDE_BATCH_SIZE", "64")
    monkeypatch.setenv("LIQPDE_OUT_DIR", "/tmp/liqpde")
    try:
        importlib.reload(settings)
        assert settings.BATCH_SIZE == 64
        assert settings.OUT_DIR == "/tmp/liqpde"
    finally:
        monkeypatch.undo()
        importlib.reload(settings)


def test_batch_size_does_not_change_results(dark_pool_problem, dark_pool_surface, monkeypatch):
    mesh = simulation_mesh(0.0, 1.0, n_steps=50)
    monkeypatch.setattr(settings, "BATCH_SIZE", 3)
    small = simulate_ensemble(dark_pool_problem, "optimal", mesh, 10, 1, dark_pool_surface)
    monkeypatch.setattr(settings, "BATCH_SIZE", 2048)
    large = simulate_ensemble(dark_pool_problem, "optimal", mesh, 10, 1, dark_pool_surface)
    assert small.cost == pytest.approx(large.cost, rel=1e-12)
