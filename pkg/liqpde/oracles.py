# Copyright (c) 2026 liqpde developers
# MIT License

"""
Reference values for problems with known or ODE-reducible solutions.
"""

import logging
import math
from typing import Tuple

import numpy as np
from scipy.integrate import solve_ivp

from liqpde.coefficients import as_states
from liqpde.model import LiquidationProblem

logger = logging.getLogger(__name__)

ODE_START = 1e-8


def separable_value(eta: float, p: float, tau: np.ndarray) -> np.ndarray:
    """Exact value eta / tau^(1/beta) for constant eta without risk or dark pool."""
    beta = 1.0 / (p - 1.0)
    return eta / np.asarray(tau, dtype=float) ** (1.0 / beta)


def coth_value(tau: np.ndarray) -> np.ndarray:
    """Exact value for eta = lambda = 1, theta = 0, p = 2."""
    return 1.0 / np.tanh(np.asarray(tau, dtype=float))


def constant_coefficient_value(
    eta: float,
    gamma: float,
    lam: float,
    theta: float,
    p: float,
    tau: np.ndarray,
    rtol: float = 1e-10,
) -> np.ndarray:
    """
    v(tau) for spatially constant coefficients, from the corrector ODE
    u' = f(t, u), u(0) = 0, integrated with Radau. The binomial tail is taken
    in closed form (1 + z)^(beta+1) - 1 - (beta+1) z.
    """
    beta = 1.0 / (p - 1.0)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus <= ODE_START):
        raise ValueError(f"Oracle needs tau > {ODE_START}")

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        u = y[0]
        w = t * eta + u
        z = u / (t * eta)
        tail = math.expm1((beta + 1) * math.log1p(z)) - (beta + 1) * z
        g = t**p * gamma
        if g > 0 and w != 0:
            dark = g * w / (g**beta + abs(w) ** beta) ** (1.0 / beta)
        else:
            dark = 0.0
        return np.array([t**p * lam - eta / beta * tail + theta * dark - theta * w])

    order = np.argsort(taus)
    solution = solve_ivp(
        rhs,
        (ODE_START, float(taus.max())),
        [0.0],
        method="Radau",
        t_eval=taus[order],
        rtol=rtol,
        atol=1e-14,
    )
    if not solution.success:
        raise RuntimeError(f"Oracle integration failed: {solution.message}")
    u = np.empty_like(taus)
    u[order] = solution.y[0]
    value = eta / taus ** (1.0 / beta) + u / taus**p
    logger.debug("Constant coefficient oracle on %s points (%s rhs calls)", len(taus), solution.nfev)
    return value if np.ndim(tau) else value[0]


def twap_cost(eta: float, lam: float, p: float, T: float, x0: float) -> float:
    """Cost of selling x0 at the constant rate x0 / T with constant coefficients."""
    return abs(x0) ** p * (eta * T ** (1 - p) + lam * T / (p + 1))


def terminal_envelope(
    problem: LiquidationProblem, tau: np.ndarray, y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sub- and supersolution envelope of v near the terminal time:
    (eta - |L eta| tau) e^(-theta tau) / tau^(1/beta)
        <= v <=
    (eta + |L eta| tau / 2) / tau^(1/beta) + tau |lambda|,
    valid for tau <= min(kappa0 / |L eta|, T).
    """
    costs = problem.costs
    tau = np.asarray(tau, dtype=float)
    limit = problem.horizon
    if costs.op_eta_bound > 0:
        limit = min(limit, costs.kappa0 / costs.op_eta_bound)
    if np.any(tau <= 0) or np.any(tau > limit * (1 + 1e-12)):
        raise ValueError(f"Envelope holds for 0 < tau <= {limit}")
    eta = costs.eta(as_states(y, problem.dim))
    scale = tau ** (1.0 / costs.beta)
    lower = (eta - costs.op_eta_bound * tau) * np.exp(-costs.theta * tau) / scale
    upper = (eta + 0.5 * costs.op_eta_bound * tau) / scale + tau * costs.lambda_bound
    return lower, upper
