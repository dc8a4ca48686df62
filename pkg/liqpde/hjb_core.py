# Copyright (c) 2026 liqpde developers
# MIT License

"""
Pointwise evaluation of the HJB nonlinearity F, the transformed nonlinearity f
of the corrector u, the singular ansatz v = eta/tau^(1/beta) + u/tau^p and the
optimal feedback maps.

The `*_kernel` functions work on plain arrays of coefficient samples and are
what the solver and the simulator call in their inner loops. The remaining
functions evaluate the coefficients at factor states first.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.special import binom

from liqpde.coefficients import as_states
from liqpde.exceptions import GrowthConditionViolation, SingularTimeError
from liqpde.model import CostModel

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MAX_SERIES_TERMS = 10_000
GROWTH_SLACK = 1e-12


@dataclass(frozen=True)
class FeedbackPair:
    xi_rate: ArrayLike
    pi_size: ArrayLike


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def gen_binom(beta: float, k: int) -> float:
    """Generalized binomial coefficient C(beta + 1, k)."""
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return float(binom(beta + 1.0, k))


def dark_pool_kernel(gamma: np.ndarray, w: np.ndarray, beta: float) -> np.ndarray:
    """gamma * w / (gamma^beta + |w|^beta)^(1/beta), zero where gamma or w vanishes."""
    gamma = np.asarray(gamma, dtype=float)
    w = np.asarray(w, dtype=float)
    scale = np.maximum(gamma, np.abs(w))
    positive = (gamma > 0) & (w != 0)
    safe = np.where(positive, scale, 1.0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        ratio = ((gamma / safe) ** beta + (np.abs(w) / safe) ** beta) ** (1.0 / beta)
        value = gamma * (w / safe) / ratio
    return np.where(positive, value, 0.0)


def F_kernel(
    v: np.ndarray,
    eta: np.ndarray,
    lam: np.ndarray,
    gamma: np.ndarray,
    theta: float,
    beta: float,
) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (
        lam
        - v ** (beta + 1) / (beta * eta**beta)
        + theta * dark_pool_kernel(gamma, v, beta)
        - theta * v
    )


def binomial_tail(
    beta: float, z: np.ndarray, tol: float = 1e-12, max_terms: int = MAX_SERIES_TERMS
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sum S(z) = sum_{k>=2} C(beta+1, k) z^k for |z| <= 1, returning S and S/z.

    Terms are added until the geometric tail bound |C_k z^k| |z| / (1 - |z|)
    drops below `tol`; for integer beta the series terminates exactly.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    coef = (beta + 1.0) * beta / 2.0
    power = z.copy()
    reduced = np.zeros_like(z)
    active = np.ones(z.shape, dtype=bool)
    k = 2
    while True:
        term = coef * power
        reduced += np.where(active, term, 0.0)
        next_coef = coef * (beta + 1.0 - k) / (k + 1)
        if next_coef == 0.0:
            break
        # from here on |C_{j+1}| <= |C_j|, so the geometric bound applies
        if k >= beta / 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                bound = np.abs(term * z) * a / (1.0 - a)
            active &= ~(bound < tol)
            if not active.any():
                break
        if k >= max_terms:
            logger.warning(
                "Binomial series capped at %s terms for %s points (max |z| = %.6g)",
                max_terms,
                int(active.sum()),
                float(a[active].max()),
            )
            break
        coef = next_coef
        power = power * z
        k += 1
    return reduced * z, reduced


def _growth_check(t: np.ndarray, u: np.ndarray, eta: np.ndarray) -> None:
    excess = np.abs(u) - t * eta * (1 + GROWTH_SLACK) - GROWTH_SLACK
    if np.any(excess > 0):
        i = np.unravel_index(np.argmax(excess), np.shape(excess))
        raise GrowthConditionViolation(
            f"|u| = {np.abs(u)[i]:.6g} exceeds t*eta = {(t * eta)[i]:.6g} at t = {t[i]:.6g}"
        )


def f_split(
    t: np.ndarray,
    u: np.ndarray,
    eta: np.ndarray,
    lam: np.ndarray,
    gamma: np.ndarray,
    op_eta: np.ndarray,
    theta: float,
    p: float,
    series_tol: float = 1e-12,
    check: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split f(t, u) = source + q * u - theta * u with source and q frozen at u.

    q carries the binomial series, q * u = -(eta/beta) S(u / (t eta)).
    """
    t, u, eta, lam, gamma, op_eta = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (t, u, eta, lam, gamma, op_eta))
    )
    if check:
        _growth_check(t, u, eta)
    beta = 1.0 / (p - 1.0)
    scale = t * eta
    positive = scale > 0
    z = np.where(positive, u / np.where(positive, scale, 1.0), 0.0)
    z = np.clip(z, -1.0, 1.0)
    _, reduced = binomial_tail(beta, z, series_tol)
    q = np.where(t > 0, -reduced / (beta * np.where(t > 0, t, 1.0)), 0.0)
    tp = t**p
    source = (
        t * op_eta
        + tp * lam
        + theta * dark_pool_kernel(tp * gamma, scale + u, beta)
        - theta * scale
    )
    return source, q


def f_kernel(
    t: np.ndarray,
    u: np.ndarray,
    eta: np.ndarray,
    lam: np.ndarray,
    gamma: np.ndarray,
    op_eta: np.ndarray,
    theta: float,
    p: float,
    series_tol: float = 1e-12,
) -> np.ndarray:
    source, q = f_split(t, u, eta, lam, gamma, op_eta, theta, p, series_tol)
    return source + (q - theta) * np.asarray(u, dtype=float)


def feedback_kernel(
    v: np.ndarray, eta: np.ndarray, gamma: np.ndarray, beta: float, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    v = np.maximum(np.asarray(v, dtype=float), 0.0)
    rate = (v / eta) ** beta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fraction = 1.0 / (1.0 + (gamma / v) ** beta)
    # gamma = 0 and v > 0 posts everything; v = 0 posts nothing
    fraction = np.where(v > 0, np.where(gamma > 0, fraction, 1.0), 0.0)
    return rate * x, fraction * x


def eval_F(costs: CostModel, y: np.ndarray, v: ArrayLike) -> ArrayLike:
    """HJB nonlinearity F(y, v); nonincreasing in v."""
    states = as_states(y, costs.eta.dim)
    value = F_kernel(
        v,
        costs.eta(states),
        costs.lam(states),
        costs.gamma(states),
        costs.theta,
        costs.beta,
    )
    return _scalar_or_array(value)


def eval_f(
    costs: CostModel,
    opLeta: ArrayLike,
    t: ArrayLike,
    u: ArrayLike,
    y: np.ndarray,
    series_tol: float = 1e-12,
) -> ArrayLike:
    """
    Transformed nonlinearity of the corrector equation u' = L u + f(t, u).

    Requires the growth condition |u| <= t eta(y); f(0, 0, y) = 0.
    """
    if series_tol <= 0:
        raise ValueError("series_tol must be positive")
    states = as_states(y, costs.eta.dim)
    value = f_kernel(
        t,
        u,
        costs.eta(states),
        costs.lam(states),
        costs.gamma(states),
        opLeta,
        costs.theta,
        costs.p,
        series_tol,
    )
    return _scalar_or_array(value)


def reconstruct_v(eta_y: ArrayLike, t_to_T: ArrayLike, u: ArrayLike, beta: float) -> ArrayLike:
    tau = np.asarray(t_to_T, dtype=float)
    if np.any(tau <= 0):
        raise SingularTimeError(f"Remaining time must be positive, got {np.min(tau)}")
    value = eta_y / tau ** (1.0 / beta) + np.asarray(u, dtype=float) / tau ** (1.0 + 1.0 / beta)
    return _scalar_or_array(value)


def feedback(costs: CostModel, y: np.ndarray, v: ArrayLike, x: ArrayLike) -> FeedbackPair:
    states = as_states(y, costs.eta.dim)
    xi, pi = feedback_kernel(v, costs.eta(states), costs.gamma(states), costs.beta, x)
    return FeedbackPair(_scalar_or_array(xi), _scalar_or_array(pi))
