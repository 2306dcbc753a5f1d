"""Empirical L2 reduction: normal equations and the matrix-free design operator.

The design matrix has entries ``D[(l, i), (j, q)] = A[l, i, j] X[l, q]`` with
rows path-major and columns in the flat column order. The normal equations
are ``G z = h`` with ``G = D^T D / N`` and ``h = D^T y / N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._accumulate import stream_sum
from .errors import DimensionMismatchError
from .tensors import FlatIndexMaps, HedgeCoefficients, as_array, check_finite, validate_problem

__all__ = [
    "ResidualWeights",
    "NormalSystem",
    "assemble_normal",
    "apply_design",
    "apply_design_adjoint",
    "design_diagonal",
    "ls_objective",
    "pathwise_residuals",
]


@dataclass(frozen=True, eq=False)
class ResidualWeights:
    """Metric on primitive space: one ``n x n`` matrix per path, or one shared matrix."""

    matrices: np.ndarray

    def __post_init__(self):
        W = np.array(self.matrices, dtype=np.float64)
        if W.ndim not in (2, 3) or W.shape[-1] != W.shape[-2]:
            raise DimensionMismatchError("shape", "(n, n) or (N, n, n)", W.shape, "W")
        check_finite("W", W)
        W.setflags(write=False)
        object.__setattr__(self, "matrices", W)

    @property
    def per_path(self) -> bool:
        return self.matrices.ndim == 3

    @property
    def tag(self) -> str:
        return "per-path" if self.per_path else "shared"

    def check(self, n_paths: int, n: int) -> None:
        if self.matrices.shape[-1] != n:
            raise DimensionMismatchError("n", n, self.matrices.shape[-1], "W")
        if self.per_path and self.matrices.shape[0] != n_paths:
            raise DimensionMismatchError("N", n_paths, self.matrices.shape[0], "W")

    def apply(self, A_blk: np.ndarray, b_blk: np.ndarray, start: int, stop: int):
        if self.per_path:
            W = self.matrices[start:stop]
            return np.einsum("lik,lkj->lij", W, A_blk), np.einsum("lik,lk->li", W, b_blk)
        W = self.matrices
        return np.einsum("ik,lkj->lij", W, A_blk), b_blk @ W.T


def _weights(W) -> Optional[ResidualWeights]:
    if W is None or isinstance(W, ResidualWeights):
        return W
    return ResidualWeights(W)


@dataclass(frozen=True, eq=False)
class NormalSystem:
    """Flattened normal equations of the empirical L2 problem."""

    G_flat: np.ndarray
    h_flat: np.ndarray
    index_maps: FlatIndexMaps
    weight_tag: str = "identity"
    y_sq: float = 0.0  # mean squared (weighted) target, so the objective can be recovered

    formulation = "ls"

    @property
    def n_instruments(self) -> int:
        return self.index_maps.m

    @property
    def n_basis(self) -> int:
        return self.index_maps.r

    def objective(self, z) -> float:
        """``(1/N) ||D z - y||^2`` evaluated from the assembled moments."""
        z = np.asarray(z, dtype=np.float64)
        return float(z @ self.G_flat @ z - 2.0 * z @ self.h_flat + self.y_sq)


def assemble_normal(A, b, X, W=None, *, block_size: int = 2048, mode: str = "pairwise",
                    threads: int = 1) -> NormalSystem:
    """Accumulate ``G`` and ``h`` over path blocks.

    ``W`` (per-path or shared) is applied to ``A_l`` and ``b_l`` before
    accumulation.
    """
    N, n, m, r, _ = validate_problem(A, b, X)
    A, b, X = as_array(A), as_array(b), as_array(X)
    W = _weights(W)
    if W is not None:
        W.check(N, n)

    def block(start: int, stop: int):
        Ab, bb = A[start:stop], b[start:stop]
        if W is not None:
            Ab, bb = W.apply(Ab, bb, start, stop)
        D = np.einsum("lij,lq->liqj", Ab, X[start:stop]).reshape(-1, r * m)
        y = bb.reshape(-1)
        return D.T @ D, D.T @ y, np.array(y @ y)

    G, h, yy = stream_sum(block, N, block_size, mode, threads)
    G = G / N
    G = 0.5 * (G + G.T)
    h = h / N
    check_finite("G", G)
    check_finite("h", h)
    return NormalSystem(G, h, FlatIndexMaps(n=m, m=m, p=r, r=r),
                        "identity" if W is None else W.tag, float(yy) / N)


def _weighted(A, b, W):
    W = _weights(W)
    if W is None:
        return A, b
    W.check(A.shape[0], A.shape[1])
    return W.apply(A, b, 0, A.shape[0])


def apply_design(zeta, A, X, W=None) -> np.ndarray:
    """``D @ zeta`` without forming ``D``; output is path-major, length ``N n``."""
    A, X = as_array(A), as_array(X)
    N, n, m = A.shape
    r = X.shape[1]
    zeta = np.asarray(zeta, dtype=np.float64)
    if zeta.shape != (m * r,):
        raise DimensionMismatchError("mr", m * r, zeta.shape, "zeta")
    if X.shape[0] != N:
        raise DimensionMismatchError("N", N, X.shape[0], "X")
    if W is not None:
        A, _ = _weighted(A, np.zeros((N, n)), W)
    phi = X @ zeta.reshape(r, m)
    return np.einsum("lij,lj->li", A, phi).reshape(-1)


def apply_design_adjoint(v, A, X, W=None) -> np.ndarray:
    """``D^T @ v`` without forming ``D``; output in flat column order."""
    A, X = as_array(A), as_array(X)
    N, n, m = A.shape
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (N * n,):
        raise DimensionMismatchError("Nn", N * n, v.shape, "v")
    if X.shape[0] != N:
        raise DimensionMismatchError("N", N, X.shape[0], "X")
    if W is not None:
        A, _ = _weighted(A, np.zeros((N, n)), W)
    AtV = np.einsum("lij,li->lj", A, v.reshape(N, n))
    return (X.T @ AtV).reshape(-1)


def design_diagonal(A, X, W=None) -> np.ndarray:
    """Diagonal of ``D^T D / N``, used as a Jacobi preconditioner."""
    A, X = as_array(A), as_array(X)
    if W is not None:
        A, _ = _weighted(A, np.zeros(A.shape[:2]), W)
    col_sq = np.einsum("lij,lij->lj", A, A)
    return ((X * X).T @ col_sq).reshape(-1) / A.shape[0]


def pathwise_residuals(coeffs, A, b, X) -> np.ndarray:
    """``R[l] = A_l phi_l - b_l`` for coefficients ``xi`` (``m x r``)."""
    xi = coeffs.values if isinstance(coeffs, HedgeCoefficients) else np.asarray(coeffs, float)
    A, b, X = as_array(A), as_array(b), as_array(X)
    if xi.shape != (A.shape[2], X.shape[1]):
        raise DimensionMismatchError("(m, r)", (A.shape[2], X.shape[1]), xi.shape, "xi")
    phi = X @ xi.T
    return np.einsum("lij,lj->li", A, phi) - b


def ls_objective(coeffs, A, b, X, W=None) -> float:
    """``(1/N) sum_l ||W_l (A_l phi_l - b_l)||^2``."""
    validate_problem(A, b, X)
    R = pathwise_residuals(coeffs, A, b, X)
    W = _weights(W)
    if W is not None:
        W.check(R.shape[0], R.shape[1])
        if W.per_path:
            R = np.einsum("lik,lk->li", W.matrices, R)
        else:
            R = R @ W.matrices.T
    return float(np.sum(R * R) / R.shape[0])
