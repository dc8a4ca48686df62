# Copyright (c) 2026 liqpde developers
# MIT License

import logging
import math
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import expit

from liqpde.data_models import CoefficientSpec

logger = logging.getLogger(__name__)


def _as_states(y: np.ndarray, dim: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1)
    if y.shape[-1] != dim:
        raise ValueError(f"Expected states with trailing dimension {dim}, got shape {y.shape}")
    return y


def as_states(y: np.ndarray, dim: int) -> np.ndarray:
    """
    Coerce user input to states of shape (..., d). In one dimension a bare
    scalar or a flat array of points is accepted.
    """
    y = np.asarray(y, dtype=float)
    if dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    return _as_states(y, dim)


class Coefficient(ABC):
    """A scalar function of the factor state, evaluated on arrays of shape (..., d)."""

    dim: int

    @abstractmethod
    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        ...

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = _as_states(y, self.dim)
        return np.asarray(self._evaluate(y), dtype=float)


class Constant(Coefficient):
    def __init__(self, value: float, dim: int = 1) -> None:
        self.value = float(value)
        self.dim = dim

    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        return np.full(y.shape[:-1], self.value)

    def __repr__(self) -> str:
        return f"<Constant {self.value}>"


class Affine(Coefficient):
    def __init__(self, intercept: float, slope: Sequence[float], dim: int = 1) -> None:
        self.dim = dim
        self.intercept = float(intercept)
        self.slope = np.zeros(dim) if len(slope) == 0 else np.asarray(slope, dtype=float)
        if self.slope.shape != (dim,):
            raise ValueError(f"Slope must have {dim} components")

    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.intercept + y @ self.slope

    def __repr__(self) -> str:
        return f"<Affine {self.intercept} + {self.slope.tolist()}.y>"


class Logistic(Coefficient):
    def __init__(
        self, low: float, high: float, intercept: float, slope: Sequence[float], dim: int = 1
    ) -> None:
        self.dim = dim
        self.low = float(low)
        self.high = float(high)
        self.linear = Affine(intercept, slope, dim)

    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.low + (self.high - self.low) * expit(self.linear._evaluate(y))

    def __repr__(self) -> str:
        return f"<Logistic [{self.low}, {self.high}] of {self.linear!r}>"


class Tabulated(Coefficient):
    """Monotone cubic interpolation along one axis, constant outside the nodes."""

    def __init__(
        self, nodes: Sequence[float], values: Sequence[float], axis: int = 0, dim: int = 1
    ) -> None:
        if axis >= dim:
            raise ValueError(f"Tabulated axis {axis} out of range for dimension {dim}")
        self.dim = dim
        self.axis = axis
        self.nodes = np.asarray(nodes, dtype=float)
        self.interpolant = PchipInterpolator(self.nodes, np.asarray(values, dtype=float))

    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        x = np.clip(y[..., self.axis], self.nodes[0], self.nodes[-1])
        return self.interpolant(x)

    def __repr__(self) -> str:
        return f"<Tabulated axis={self.axis} on [{self.nodes[0]}, {self.nodes[-1]}]>"


def smooth_clamp(x: np.ndarray, floor: float, cap: float, width: float) -> np.ndarray:
    """
    Clamp x to [floor, cap] with quadratic C1 blends of half-width `width`
    around each active bound; identity on [floor + width, cap - width].
    """
    x = np.asarray(x, dtype=float)
    if width <= 0:
        return np.clip(x, floor, cap)
    out = x.copy()
    if math.isfinite(cap):
        blend = (x > cap - width) & (x < cap + width)
        out = np.where(blend, x - (x - cap + width) ** 2 / (4 * width), out)
        out = np.where(x >= cap + width, cap, out)
    if math.isfinite(floor):
        blend = (x > floor - width) & (x < floor + width)
        out = np.where(blend, x + (floor + width - x) ** 2 / (4 * width), out)
        out = np.where(x <= floor - width, floor, out)
    return out


def default_width(floor: float, cap: float) -> float:
    if math.isfinite(floor) and math.isfinite(cap):
        return 0.01 * min(1.0, cap - floor)
    return 0.01


class Clipped(Coefficient):
    def __init__(self, raw: Coefficient, floor: float, cap: float, width: float) -> None:
        self.dim = raw.dim
        self.raw = raw
        self.floor = floor
        self.cap = cap
        self.width = width

    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        return smooth_clamp(self.raw._evaluate(y), self.floor, self.cap, self.width)

    def __repr__(self) -> str:
        return f"<Clipped {self.raw!r} to [{self.floor}, {self.cap}] width={self.width}>"


def clip_coefficients(
    raw: Coefficient,
    floor: float = -math.inf,
    cap: float = math.inf,
    width: Optional[float] = None,
) -> Coefficient:
    """
    Bound a coefficient to [floor, cap]. The result equals `raw` wherever
    raw lies in [floor + width, cap - width] and is C1 with slope at most the
    slope of `raw`.
    """
    if not floor < cap:
        raise ValueError(f"Floor {floor} must be below cap {cap}")
    if width is None:
        width = default_width(floor, cap)
    if math.isfinite(floor) and math.isfinite(cap) and 2 * width > cap - floor:
        logger.warning("Clip width %s exceeds half the band; shrinking it", width)
        width = (cap - floor) / 2
    return Clipped(raw, floor, cap, width)


def from_spec(spec: CoefficientSpec, dim: int) -> Coefficient:
    coefficient: Coefficient
    if spec.form == "constant":
        coefficient = Constant(spec.value, dim)
    elif spec.form == "affine_clipped":
        coefficient = Affine(spec.intercept, spec.slope, dim)
    elif spec.form == "logistic":
        coefficient = Logistic(spec.low, spec.high, spec.intercept, spec.slope, dim)
    elif spec.form == "tabulated":
        coefficient = Tabulated(spec.nodes, spec.values, spec.axis, dim)
    else:
        raise ValueError(f"Cannot build coefficient of form {spec.form!r}")

    if spec.floor is not None or spec.cap is not None:
        coefficient = clip_coefficients(
            coefficient,
            floor=-math.inf if spec.floor is None else spec.floor,
            cap=math.inf if spec.cap is None else spec.cap,
            width=spec.width,
        )
    return coefficient
