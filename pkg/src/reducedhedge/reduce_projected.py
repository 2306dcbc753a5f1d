"""Projected moment reduction (Galerkin when the test basis equals the solution basis).

Entries are ``B[i, j, s, q] = mean_l A[l, i, j] X[l, q] Y[l, s]`` and
``beta[i, s] = mean_l b[l, i] Y[l, s]``, flattened to ``B_flat z = g`` with
rows ``(s, i)`` and columns ``(q, j)``. ``X`` need not be orthonormal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._accumulate import stream_sum
from .tensors import FlatIndexMaps, as_array, check_finite, validate_problem

__all__ = ["ProjectedSystem", "assemble_projected", "assemble_galerkin"]


@dataclass(frozen=True, eq=False)
class ProjectedSystem:
    B_flat: np.ndarray
    beta_flat: np.ndarray
    index_maps: FlatIndexMaps
    test_basis_id: Optional[str] = None

    formulation = "projected"

    @property
    def n_instruments(self) -> int:
        return self.index_maps.m

    @property
    def n_basis(self) -> int:
        return self.index_maps.r

    @property
    def is_square(self) -> bool:
        return self.B_flat.shape[0] == self.B_flat.shape[1]

    def block(self, s: int, q: int) -> np.ndarray:
        """The ``n x m`` block coupling test function ``s`` and basis function ``q`` (1-based)."""
        n, m = self.index_maps.n, self.index_maps.m
        return self.B_flat[(s - 1) * n : s * n, (q - 1) * m : q * m]

    def residual(self, z) -> np.ndarray:
        return self.B_flat @ np.asarray(z, dtype=np.float64) - self.beta_flat


def assemble_projected(A, b, X, Y, *, block_size: int = 2048, mode: str = "pairwise",
                       threads: int = 1) -> ProjectedSystem:
    """Stream rank-one path contributions into ``B`` and ``beta``; cost O(N n m p r)."""
    N, n, m, r, p = validate_problem(A, b, X, Y)
    test_id = getattr(Y, "basis_id", None)
    A, b, X, Y = as_array(A), as_array(b), as_array(X), as_array(Y)

    def block(start: int, stop: int):
        Yb = Y[start:stop]
        AX = np.einsum("lij,lq->liqj", A[start:stop], X[start:stop]).reshape(stop - start, -1)
        B = np.einsum("ls,lk->sk", Yb, AX)  # (p, n*r*m)
        beta = Yb.T @ b[start:stop]  # (p, n)
        return B, beta

    B, beta = stream_sum(block, N, block_size, mode, threads)
    B_flat = (B / N).reshape(p, n, r * m).reshape(p * n, r * m)
    beta_flat = (beta / N).reshape(-1)
    check_finite("B", B_flat)
    check_finite("beta", beta_flat)
    return ProjectedSystem(B_flat, beta_flat, FlatIndexMaps(n=n, m=m, p=p, r=r), test_id)


def assemble_galerkin(A, b, X, **kwargs) -> ProjectedSystem:
    """Projected system with the solution basis as test basis."""
    return assemble_projected(A, b, X, X, **kwargs)
