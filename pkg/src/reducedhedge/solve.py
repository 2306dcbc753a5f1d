"""Direct, least-squares and Tikhonov-regularised solves of reduced systems.

The general problem is ``min ||W (C z - d)||^2 + lam ||L (z - z0)||^2``.
Dense solves go through an SVD so rank and conditioning come for free; large
empirical L2 problems can instead be solved matrix-free with preconditioned
conjugate gradients on the normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConvergenceError, DimensionMismatchError, SingularSystemError
from .reduce_ls import (
    NormalSystem,
    _weighted,
    apply_design,
    apply_design_adjoint,
    assemble_normal,
    design_diagonal,
    ls_objective,
)
from .reduce_projected import ProjectedSystem, assemble_projected
from .tensors import HedgeCoefficients, as_array, check_finite, validate_problem

__all__ = [
    "RegularizationSpec",
    "SolveReport",
    "condition_estimate",
    "solve_least_squares",
    "solve_reduced",
    "solve_matrix_free",
    "fit_least_squares",
    "fit_projected",
    "DEFAULT_RCOND",
]

DEFAULT_RCOND = 1e-12


@dataclass(frozen=True, eq=False)
class RegularizationSpec:
    """Tikhonov settings. ``L`` defaults to the identity, ``z0`` to zero, ``W`` to the identity."""

    lam: float = 0.0
    L: Optional[np.ndarray] = None
    z0: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0:
            raise ValueError(f"regularisation weight must be finite and >= 0, got {self.lam}")
        object.__setattr__(self, "lam", lam)
        for name in ("L", "z0", "W"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=np.float64)
                check_finite(name, v)
                object.__setattr__(self, name, v)
        if self.L is not None:
            if self.L.ndim != 2:
                raise DimensionMismatchError("ndim", 2, self.L.ndim, "L")
            s = np.linalg.svd(self.L, compute_uv=False)
            if s.size < self.L.shape[1] or s[-1] <= DEFAULT_RCOND * s[0]:
                raise ValueError("regularisation operator L must have full column rank")

    def operator(self, k: int) -> np.ndarray:
        if self.L is None:
            return np.eye(k)
        if self.L.shape[1] != k:
            raise DimensionMismatchError("cols(L)", k, self.L.shape[1], "L")
        return self.L

    def prior(self, k: int) -> np.ndarray:
        if self.z0 is None:
            return np.zeros(k)
        if self.z0.shape != (k,):
            raise DimensionMismatchError("len(z0)", k, self.z0.shape, "z0")
        return self.z0


@dataclass(eq=False)
class SolveReport:
    """Outcome of a solve.

    ``rank`` and ``singular_values`` describe the (weighted) system matrix;
    ``condition_estimate`` is that of the matrix actually factorised, so it
    includes the Tikhonov rows when ``lam > 0``.
    """

    solution: np.ndarray
    residual_norm: float
    rank: int
    condition_estimate: float
    method_tag: str
    iterations: Optional[int] = None
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "solution": [float(v) for v in self.solution],
            "residual_norm": float(self.residual_norm),
            "rank": int(self.rank),
            "condition_estimate": _json_float(self.condition_estimate),
            "method_tag": self.method_tag,
            "iterations": self.iterations,
        }


def _json_float(x: float):
    return float(x) if np.isfinite(x) else "inf"


def _cond_from_sv(s: np.ndarray, rcond: float) -> float:
    if s.size == 0 or s[0] == 0.0 or s[-1] <= rcond * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def condition_estimate(C, rcond: float = DEFAULT_RCOND) -> float:
    """2-norm condition number; ``inf`` when numerically rank deficient."""
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    check_finite("C", C)
    return _cond_from_sv(np.linalg.svd(C, compute_uv=False), rcond)


def _svd_solve(C: np.ndarray, d: np.ndarray, rcond: float):
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, bool)
    z = Vt[keep].T @ ((U[:, keep].T @ d) / s[keep])
    return z, int(keep.sum()), s


def solve_least_squares(C, d, reg: Optional[RegularizationSpec] = None,
                        rcond: float = DEFAULT_RCOND) -> SolveReport:
    """Minimise ``||W (C z - d)||^2 + lam ||L (z - z0)||^2``.

    With ``lam = 0`` the minimum-norm least-squares solution is returned, and
    singular values below ``rcond * s_max`` count as zero.
    """
    reg = reg or RegularizationSpec()
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    if C.shape[0] != d.shape[0]:
        raise DimensionMismatchError("rows", C.shape[0], d.shape[0], "d")
    check_finite("C", C)
    check_finite("d", d)
    k = C.shape[1]
    if reg.W is not None:
        if reg.W.shape != (C.shape[0], C.shape[0]):
            raise DimensionMismatchError("W", (C.shape[0],) * 2, reg.W.shape, "W")
        C, d = reg.W @ C, reg.W @ d
    if reg.lam == 0.0:
        z, rank, s = _svd_solve(C, d, rcond)
        cond = _cond_from_sv(s, rcond)
        tag = "direct" if C.shape[0] == k and rank == k else "least-squares"
    else:
        L = reg.operator(k)
        root = np.sqrt(reg.lam)
        M = np.vstack([C, root * L])
        rhs = np.concatenate([d, root * (L @ reg.prior(k))])
        z, _, sm = _svd_solve(M, rhs, rcond)
        s = np.linalg.svd(C, compute_uv=False)
        rank = int(np.sum(s > rcond * s[0])) if s.size and s[0] > 0 else 0
        cond = _cond_from_sv(sm, rcond)
        tag = "regularized"
    return SolveReport(z, float(np.linalg.norm(C @ z - d)), rank, cond, tag, singular_values=s)


def solve_reduced(system: Union[NormalSystem, ProjectedSystem],
                  reg: Optional[RegularizationSpec] = None, basis_id: Optional[str] = None,
                  *, mode: str = "auto", rcond: float = DEFAULT_RCOND):
    """Solve an assembled reduced system and unflatten the coefficients.

    Normal systems solve ``(G + lam L^T L) z = h + lam L^T L z0``; their
    ``residual_norm`` is the root of the empirical L2 objective. Projected
    systems are solved directly when square and nonsingular; otherwise in the
    (regularised) least-squares sense. With ``mode="auto"`` a singular square
    projected system raises :class:`SingularSystemError`; ``mode="least-squares"``
    returns the minimum-norm solution instead.

    Returns ``(HedgeCoefficients, SolveReport)``.
    """
    if mode not in ("auto", "least-squares"):
        raise ValueError(f"unknown solve mode {mode!r}")
    reg = reg or RegularizationSpec()
    m, r = system.n_instruments, system.n_basis
    if isinstance(system, NormalSystem):
        if reg.W is not None:
            raise ValueError("row weights on a normal system must be applied at assembly "
                             "(ResidualWeights); RegularizationSpec.W is not supported here")
        k = m * r
        G, h = system.G_flat, system.h_flat
        if reg.lam > 0.0:
            L = reg.operator(k)
            LtL = L.T @ L
            G = G + reg.lam * LtL
            h = h + reg.lam * (LtL @ reg.prior(k))
        z, rank, s = _svd_solve(G, h, rcond)
        tag = "regularized" if reg.lam > 0 else ("direct" if rank == k else "least-squares")
        s_design = np.sqrt(np.clip(np.linalg.eigvalsh(system.G_flat)[::-1], 0.0, None))
        report = SolveReport(
            z,
            float(np.sqrt(max(system.objective(z), 0.0))),
            int(np.sum(s_design > np.sqrt(rcond) * s_design[0])) if s_design[0] > 0 else 0,
            _cond_from_sv(s, rcond),
            tag,
            singular_values=s_design,
        )
    elif isinstance(system, ProjectedSystem):
        B, g = system.B_flat, system.beta_flat
        if system.is_square and reg.lam == 0.0 and reg.W is None and mode == "auto":
            report = solve_least_squares(B, g, reg, rcond)
            if report.rank < B.shape[1]:
                raise SingularSystemError(
                    f"square projected system is singular (rank {report.rank} < {B.shape[1]}); "
                    "use lam > 0 or mode='least-squares'"
                )
        else:
            report = solve_least_squares(B, g, reg, rcond)
    else:
        raise TypeError(f"cannot solve {type(system).__name__}")
    check_finite("solution", report.solution)
    return HedgeCoefficients.from_flat(report.solution, m, r, basis_id), report


def solve_matrix_free(A, b, X, reg: Optional[RegularizationSpec] = None, W=None,
                      basis_id: Optional[str] = None, *, tol: float = 1e-12,
                      max_iter: Optional[int] = None):
    """Empirical L2 fit without forming ``G``: Jacobi-preconditioned CG on the normal equations.

    Solves ``(D^T D / N + lam L^T L) z = D^T y / N + lam L^T L z0``, touching
    ``D`` only through :func:`apply_design` and :func:`apply_design_adjoint`.
    """
    reg = reg or RegularizationSpec()
    if reg.W is not None:
        raise ValueError("use ResidualWeights (argument W) for the matrix-free path")
    N, n, m, r, _ = validate_problem(A, b, X)
    A_, b_, X_ = as_array(A), as_array(b), as_array(X)
    if W is not None:
        A_, b_ = _weighted(A_, b_, W)
    k = m * r
    LtL = None
    if reg.lam > 0:
        L = reg.operator(k)
        LtL = L.T @ L

    def op(z):
        out = apply_design_adjoint(apply_design(z, A_, X_), A_, X_) / N
        if LtL is not None:
            out = out + reg.lam * (LtL @ z)
        return out

    rhs = apply_design_adjoint(b_.reshape(-1), A_, X_) / N
    if LtL is not None:
        rhs = rhs + reg.lam * (LtL @ reg.prior(k))
    diag = design_diagonal(A_, X_)
    if LtL is not None:
        diag = diag + reg.lam * np.diag(LtL)
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)

    max_iter = max_iter or max(50, 20 * k)
    z = np.zeros(k)
    res = rhs.copy()
    zres = inv_diag * res
    p = zres.copy()
    rz = res @ zres
    target = tol * max(np.linalg.norm(rhs), np.finfo(float).tiny)
    it = 0
    while np.linalg.norm(res) > target:
        if it >= max_iter:
            raise ConvergenceError(
                f"matrix-free CG did not converge in {max_iter} iterations "
                f"(residual {np.linalg.norm(res):.3e}, target {target:.3e})"
            )
        Ap = op(p)
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = rz / pAp
        z = z + alpha * p
        res = res - alpha * Ap
        zres = inv_diag * res
        rz_new = res @ zres
        p = zres + (rz_new / rz) * p
        rz = rz_new
        it += 1
    tag = "regularized" if reg.lam > 0 else "least-squares"
    report = SolveReport(z, float(np.sqrt(ls_objective(z.reshape(r, m).T, A_, b_, X_))),
                         k, float("nan"), tag, iterations=it)
    return HedgeCoefficients.from_flat(z, m, r, basis_id), report


def fit_least_squares(A, b, X, reg: Optional[RegularizationSpec] = None, W=None, *,
                      explicit_max: int = 2000, rcond: float = DEFAULT_RCOND, **assembly):
    """Empirical L2 fit; explicit normal equations when ``m r <= explicit_max``, else matrix-free."""
    basis_id = getattr(X, "basis_id", None)
    _, _, m, r, _ = validate_problem(A, b, X)
    if m * r > explicit_max:
        return solve_matrix_free(A, b, X, reg, W, basis_id)
    system = assemble_normal(A, b, X, W, **assembly)
    return solve_reduced(system, reg, basis_id, rcond=rcond)


def fit_projected(A, b, X, Y=None, reg: Optional[RegularizationSpec] = None, *,
                  mode: str = "auto", rcond: float = DEFAULT_RCOND, **assembly):
    """Projected fit; Galerkin when ``Y`` is omitted."""
    basis_id = getattr(X, "basis_id", None)
    system = assemble_projected(A, b, X, X if Y is None else Y, **assembly)
    return solve_reduced(system, reg, basis_id, mode=mode, rcond=rcond)
