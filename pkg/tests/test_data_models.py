import pytest
from pydantic import ValidationError

from liqpde.data_models import (
    CoefficientSpec,
    CostSection,
    ExperimentConfig,
    FactorSection,
    GridSection,
    ProblemSection,
    load_config,
    parse_config,
)
from liqpde.exceptions import ConfigError


def test_defaults_pass():
    config = ExperimentConfig()
    assert config.problem.horizon == 1.0
    assert config.grid.n_time == 1000
    assert config.grid.n_space == 41
    assert config.simulation.seed == 20240101


def test_lambda_alias():
    costs = CostSection.model_validate({"lambda": {"form": "constant", "value": 2.0}})
    assert costs.lam.value == 2.0
    assert costs.model_dump(by_alias=True)["lambda"]["value"] == 2.0


def test_negative_theta():
    with pytest.raises(ValidationError, match="Dark pool intensity must be nonnegative"):
        CostSection(theta=-1.0)


def test_nonpositive_kappa0():
    with pytest.raises(ValidationError, match="Impact floor kappa0 must be positive"):
        CostSection(kappa0=0.0)


def test_negative_width():
    with pytest.raises(ValueError, match="Width: '-0.5' must be nonnegative"):
        CoefficientSpec(width=-0.5)


def test_floor_above_cap():
    with pytest.raises(ValidationError, match="must be below cap"):
        CoefficientSpec(form="affine_clipped", slope=[1.0], floor=2.0, cap=1.0)


def test_tabulated_needs_matching_values():
    with pytest.raises(ValidationError, match="one value per node"):
        CoefficientSpec(form="tabulated", nodes=[0.0, 1.0], values=[1.0])


def test_tabulated_nodes_increasing():
    with pytest.raises(ValidationError, match="strictly increasing"):
        CoefficientSpec(form="tabulated", nodes=[0.0, 0.0, 1.0], values=[1.0, 1.0, 2.0])


def test_unknown_form():
    with pytest.raises(ValidationError):
        CoefficientSpec(form="quadratic")


def test_factor_shape_mismatch():
    with pytest.raises(ValidationError, match="Diffusion must be a 1x2 matrix"):
        FactorSection(dim=1, noise_dim=2)


def test_problem_dimension_mismatch():
    raw = {"domain": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]}}
    with pytest.raises(ValidationError, match="must have dimension 1"):
        ProblemSection.model_validate(raw)


def test_refinement_ratio_range():
    with pytest.raises(ValidationError, match="Refinement ratio must lie in"):
        GridSection(refinement_ratio=1.0)


def test_unknown_experiment_name():
    with pytest.raises(ConfigError, match="experiments.0.name"):
        parse_config({"experiments": [{"name": "plot"}]})


def test_single_path_rejected():
    with pytest.raises(ConfigError, match="At least two paths"):
        parse_config({"simulation": {"n_paths": 1}})


def test_load_config(tmp_path):
    path = tmp_path / "demo.toml"
    path.write_text(
        """
experiments = [{ name = "solve" }, { name = "certificate", output = "cert" }]

[problem.costs]
eta = { form = "constant", value = 1.0 }
lambda = { form = "constant", value = 1.0 }

[grid]
n_time = 50
"""
    )
    config = load_config(path)
    assert config.problem.costs.lam.value == 1.0
    assert config.grid.n_time == 50
    assert [e.name for e in config.experiments] == ["solve", "certificate"]
    assert config.experiments[1].output == "cert"


def test_load_config_syntax_error_has_line(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[grid]\nn_time = = 3\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read configuration"):
        load_config(tmp_path / "missing.toml")
