# Copyright (c) 2026 liqpde developers
# MIT License

import logging
import math
from typing import TYPE_CHECKING, Callable, Iterable, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized, spsolve

if TYPE_CHECKING:
    from liqpde.model import FactorModel

logger = logging.getLogger(__name__)

DEFAULT_BOUND_STEPS = tuple(2.0**-k for k in range(7))


def tensor_nodes(axes: Sequence[np.ndarray]) -> np.ndarray:
    """All nodes of a tensor mesh as an (N, d) array, first axis slowest."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


class DiscreteGenerator:
    """
    Finite difference generator 1/2 tr(sigma sigma^T D^2) + <b, D> on a uniform
    tensor mesh with zero normal derivative at the box faces.

    Second order terms use centered differences (mirror ghost nodes at the
    boundary), first order terms are upwinded and outward fluxes are dropped,
    so every row sums to zero.
    """

    def __init__(self, factor: "FactorModel", axes: Sequence[np.ndarray]) -> None:
        self.axes: Tuple[np.ndarray, ...] = tuple(np.asarray(a, dtype=float) for a in axes)
        if len(self.axes) != factor.dim:
            raise ValueError(f"Generator needs {factor.dim} axes, got {len(self.axes)}")
        self.shape = tuple(len(a) for a in self.axes)
        self.size = int(np.prod(self.shape))
        self.nodes = tensor_nodes(self.axes)
        self.matrix = self._assemble(factor)

    def _neighbour(self, index: np.ndarray, axis: int, step: int) -> Tuple[np.ndarray, np.ndarray]:
        n = self.shape[axis]
        shifted = index.copy()
        target = index[axis] + step
        inside = (target >= 0) & (target <= n - 1)
        target = np.where(target < 0, -target, target)
        target = np.where(target > n - 1, 2 * (n - 1) - target, target)
        shifted[axis] = target
        return np.ravel_multi_index(tuple(shifted), self.shape), inside

    def _assemble(self, factor: "FactorModel") -> sp.csr_matrix:
        index = np.indices(self.shape).reshape(len(self.shape), -1)
        rows_self = np.arange(self.size)
        drift = factor.b(self.nodes)
        cov = factor.covariance(self.nodes)
        rows, cols, vals = [], [], []

        def add(r: np.ndarray, c: np.ndarray, v: np.ndarray) -> None:
            rows.append(r)
            cols.append(c)
            vals.append(v)

        for i, axis in enumerate(self.axes):
            h = axis[1] - axis[0]
            plus, plus_inside = self._neighbour(index, i, 1)
            minus, minus_inside = self._neighbour(index, i, -1)

            diffusion = 0.5 * cov[:, i, i] / h**2
            add(rows_self, plus, diffusion)
            add(rows_self, minus, diffusion)
            add(rows_self, rows_self, -2 * diffusion)

            forward = np.where(plus_inside, np.maximum(drift[:, i], 0.0) / h, 0.0)
            backward = np.where(minus_inside, np.maximum(-drift[:, i], 0.0) / h, 0.0)
            add(rows_self, plus, forward)
            add(rows_self, rows_self, -forward)
            add(rows_self, minus, backward)
            add(rows_self, rows_self, -backward)

        for i in range(len(self.axes)):
            for j in range(i + 1, len(self.axes)):
                hi = self.axes[i][1] - self.axes[i][0]
                hj = self.axes[j][1] - self.axes[j][0]
                cross = cov[:, i, j] / (4 * hi * hj)
                for si, sj, sign in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
                    shifted = index.copy()
                    for ax, step in ((i, si), (j, sj)):
                        n = self.shape[ax]
                        target = index[ax] + step
                        target = np.where(target < 0, -target, target)
                        shifted[ax] = np.where(target > n - 1, 2 * (n - 1) - target, target)
                    add(rows_self, np.ravel_multi_index(tuple(shifted), self.shape), sign * cross)

        matrix = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size),
        ).tocsr()
        matrix.sum_duplicates()
        logger.debug("Assembled generator on %s nodes (%s nonzeros)", self.size, matrix.nnz)
        return matrix

    @property
    def is_monotone(self) -> bool:
        off = self.matrix - sp.diags(self.matrix.diagonal())
        return bool(off.nnz == 0 or off.data.min() >= -1e-14)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """L_h applied to nodal values; results below rounding resolution are zeroed."""
        values = np.asarray(values, dtype=float).ravel()
        result = self.matrix @ values
        noise = 64 * np.finfo(float).eps * np.abs(self.matrix.diagonal()).max(initial=0.0)
        noise *= np.abs(values).max(initial=0.0)
        return np.where(np.abs(result) <= noise, 0.0, result)

    @property
    def is_conservative(self) -> bool:
        return bool(np.allclose(np.asarray(self.matrix.sum(axis=1)).ravel(), 0.0, atol=1e-9))

    def step_matrix(self, step: float, extra_diagonal: np.ndarray = None) -> sp.csc_matrix:
        """I - step * (L_h + diag(extra_diagonal))."""
        operator = self.matrix
        if extra_diagonal is not None:
            operator = operator + sp.diags(extra_diagonal)
        return (sp.identity(self.size, format="csc") - step * operator).tocsc()

    def resolvent(self, step: float) -> Callable[[np.ndarray], np.ndarray]:
        return factorized(self.step_matrix(step))

    def resolvent_norm(self, step: float) -> float:
        """Sup-norm of (I - step L_h)^-1."""
        a = self.step_matrix(step)
        if self.is_monotone:
            # inverse of an M-matrix is entrywise nonnegative
            return float(np.max(spsolve(a, np.ones(self.size))))
        return float(np.abs(np.linalg.inv(a.toarray())).sum(axis=1).max())

    def semigroup_bound(self, steps: Iterable[float] = DEFAULT_BOUND_STEPS) -> float:
        """
        Discrete analogue of sup_{0 < t <= 1} |e^{tL}|: powers of the implicit
        resolvent covering times up to 1.
        """
        if self.is_monotone and self.is_conservative:
            # (I - s L_h)^-1 is then a stochastic matrix for every s
            return 1.0
        bound = 1.0
        for step in steps:
            norm = self.resolvent_norm(step)
            bound = max(bound, norm ** math.ceil(1.0 / step))
        return bound
