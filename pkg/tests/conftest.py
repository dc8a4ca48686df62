import pytest

from liqpde.model import build_problem
from liqpde.pde_solver import Grid, solve_v


def constant_problem_section(
    eta=1.0,
    lam=0.0,
    gamma=0.0,
    theta=0.0,
    p=2.0,
    kappa0=1.0,
    horizon=1.0,
    lower=-1.0,
    upper=1.0,
    x0=1.0,
    sigma=1.0,
):
    return {
        "factor": {
            "dim": 1,
            "noise_dim": 1,
            "drift": [{"form": "constant", "value": 0.0}],
            "diffusion": [[{"form": "constant", "value": sigma}]],
        },
        "costs": {
            "eta": {"form": "constant", "value": eta},
            "lambda": {"form": "constant", "value": lam},
            "gamma": {"form": "constant", "value": gamma},
            "theta": theta,
            "p": p,
            "kappa0": kappa0,
        },
        "horizon": horizon,
        "domain": {"lower": [lower], "upper": [upper]},
        "initial": {"t0": 0.0, "y0": [0.5 * (lower + upper)], "x0": x0},
        "mesh_density": 21,
    }


@pytest.fixture(scope="session")
def make_problem():
    def make(**kwargs):
        return build_problem(constant_problem_section(**kwargs))

    return make


@pytest.fixture(scope="session")
def separable_problem(make_problem):
    return make_problem()


@pytest.fixture(scope="session")
def coth_problem(make_problem):
    return make_problem(lam=1.0)


@pytest.fixture(scope="session")
def dark_pool_problem(make_problem):
    return make_problem(lam=1.0, gamma=1.0, theta=2.0)


@pytest.fixture(scope="session")
def ou_problem():
    section = {
        "factor": {
            "dim": 1,
            "noise_dim": 1,
            "drift": [
                {"form": "affine_clipped", "intercept": 0.0, "slope": [-1.0], "floor": -3.0, "cap": 3.0}
            ],
            "diffusion": [[{"form": "constant", "value": 0.5}]],
        },
        "costs": {
            "eta": {"form": "constant", "value": 1.0},
            "lambda": {
                "form": "affine_clipped",
                "intercept": 1.0,
                "slope": [0.5],
                "floor": 0.25,
                "cap": 2.0,
            },
            "p": 2.0,
            "kappa0": 1.0,
        },
        "horizon": 1.0,
        "domain": {"lower": [-2.0], "upper": [2.0]},
        "initial": {"t0": 0.0, "y0": [0.0], "x0": 1.0},
        "mesh_density": 41,
    }
    return build_problem(section)


@pytest.fixture(scope="session")
def logistic_problem():
    section = {
        "factor": {
            "dim": 1,
            "noise_dim": 1,
            "drift": [{"form": "constant", "value": 0.0}],
            "diffusion": [[{"form": "constant", "value": 0.4}]],
        },
        "costs": {
            "eta": {"form": "logistic", "low": 0.5, "high": 1.5, "intercept": 0.0, "slope": [2.0]},
            "lambda": {"form": "constant", "value": 1.0},
            "gamma": {"form": "constant", "value": 0.5},
            "theta": 1.0,
            "p": 2.0,
            "kappa0": 0.5,
        },
        "horizon": 1.0,
        "domain": {"lower": [-1.5], "upper": [1.5]},
        "initial": {"t0": 0.0, "y0": [0.0], "x0": 1.0},
        "mesh_density": 41,
    }
    return build_problem(section)


@pytest.fixture(scope="session")
def coarse_grid():
    def build(problem, n_time=200, n_space=11):
        return Grid.build(problem, n_time=n_time, n_space=n_space)

    return build


@pytest.fixture(scope="session")
def separable_surface(separable_problem, coarse_grid):
    return solve_v(separable_problem, coarse_grid(separable_problem))


@pytest.fixture(scope="session")
def coth_surface(coth_problem, coarse_grid):
    return solve_v(coth_problem, coarse_grid(coth_problem))


@pytest.fixture(scope="session")
def dark_pool_surface(dark_pool_problem, coarse_grid):
    return solve_v(dark_pool_problem, coarse_grid(dark_pool_problem))


@pytest.fixture(scope="session")
def ou_surface(ou_problem, coarse_grid):
    return solve_v(ou_problem, coarse_grid(ou_problem, n_time=200, n_space=21))


@pytest.fixture(scope="session")
def logistic_surface(logistic_problem, coarse_grid):
    return solve_v(logistic_problem, coarse_grid(logistic_problem, n_time=200, n_space=21))
