from dataclasses import FrozenInstanceError

import numpy as np
import pytest

from liqpde.exceptions import AssumptionViolation
from liqpde.model import Box, build_problem
from tests.conftest import constant_problem_section


def test_constant_problem_valid(make_problem):
    problem = make_problem(gamma=1.0)
    assert problem.costs.beta == pytest.approx(1.0)
    assert problem.costs.eta_bound == pytest.approx(1.0)
    assert problem.costs.op_eta_bound == 0.0
    assert problem.factor.ellipticity == pytest.approx(1.0)


def test_beta_from_exponent(make_problem):
    problem = make_problem(p=1.6)
    assert problem.costs.beta == pytest.approx(5.0 / 3.0)


def test_exponent_must_exceed_one():
    with pytest.raises(AssumptionViolation, match="cost exponent"):
        build_problem(constant_problem_section(p=1.0))


def test_impact_floor_witness():
    section = constant_problem_section(kappa0=0.1, lower=0.0, upper=2.0)
    section["costs"]["eta"] = {
        "form": "affine_clipped",
        "intercept": 0.0,
        "slope": [1.0],
        "floor": 0.0,
        "width": 0.0,
    }
    with pytest.raises(AssumptionViolation) as e:
        build_problem(section)
    assert e.value.assumption == "impact floor"
    assert e.value.witness == pytest.approx((0.0,))


def test_negative_risk_aversion_rejected():
    with pytest.raises(AssumptionViolation, match="nonnegative costs"):
        build_problem(constant_problem_section(lam=-0.5))


def test_degenerate_diffusion_rejected():
    with pytest.raises(AssumptionViolation, match="uniform ellipticity"):
        build_problem(constant_problem_section(sigma=0.0))


def test_declared_bound_exceeded():
    section = constant_problem_section()
    section["factor"]["drift"] = [{"form": "affine_clipped", "intercept": 0.0, "slope": [2.0]}]
    section["factor"]["drift_bound"] = 1.0
    with pytest.raises(AssumptionViolation) as e:
        build_problem(section)
    assert e.value.assumption == "bounded factor coefficients"
    assert abs(e.value.witness[0]) == pytest.approx(1.0)


def test_declared_lipschitz_exceeded():
    section = constant_problem_section()
    section["factor"]["drift"] = [{"form": "affine_clipped", "intercept": 0.0, "slope": [-3.0]}]
    section["factor"]["lipschitz"] = 1.0
    with pytest.raises(AssumptionViolation, match="Lipschitz factor coefficients"):
        build_problem(section)


def test_initial_time_outside_horizon():
    section = constant_problem_section()
    section["initial"]["t0"] = 1.0
    with pytest.raises(AssumptionViolation, match="initial state"):
        build_problem(section)


def test_skip_validation():
    problem = build_problem(constant_problem_section(sigma=0.0), validate=False)
    assert problem.factor.ellipticity == 0.0


def test_operator_eta_bound_measured(logistic_problem):
    assert logistic_problem.costs.op_eta_bound > 0
    assert logistic_problem.costs.eta_bound <= 1.5


def test_box_reflect():
    box = Box(np.array([0.0]), np.array([1.0]))
    reflected = box.reflect(np.array([[1.25], [-0.25], [2.5], [0.5]]))
    assert reflected[:, 0] == pytest.approx([0.75, 0.25, 0.5, 0.5])


def test_box_interior():
    box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    assert box.is_interior([0.0, 0.5])
    assert not box.is_interior([0.0, 0.9])
    assert box.contains([1.0, -1.0])


def test_box_widened():
    box = Box(np.array([0.0]), np.array([2.0])).widened(2.0)
    assert box.lower == pytest.approx([-1.0])
    assert box.upper == pytest.approx([3.0])


def test_with_domain_resets_mesh(coth_problem):
    wide = coth_problem.with_domain(coth_problem.domain.widened(2.0))
    assert wide.validation_nodes() is not coth_problem.validation_nodes()
    assert wide.validation_nodes()[0, 0] == pytest.approx(-2.0)
    assert coth_problem.validation_nodes()[0, 0] == pytest.approx(-1.0)


def test_validation_nodes_are_frozen(coth_problem):
    nodes = coth_problem.validation_nodes()
    assert nodes is coth_problem.validation_nodes()
    assert nodes.shape == (coth_problem.mesh_density, 1)
    with pytest.raises(ValueError):
        nodes[0, 0] = 5.0
    with pytest.raises(FrozenInstanceError):
        coth_problem.nodes = None


def test_revalidation_is_idempotent(ou_problem):
    factor, costs, nodes = ou_problem.factor, ou_problem.costs, ou_problem.validation_nodes()
    assert ou_problem.validate() is ou_problem
    assert ou_problem.validate() is ou_problem
    assert ou_problem.factor is factor and ou_problem.costs is costs
    assert ou_problem.validation_nodes() is nodes
