"""Residual monitoring and baselines for reduced hedge fits.

A small projected residual says nothing about the full pathwise residual, so
reports always carry both, and the comparison record fits every formulation
side by side rather than picking one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .reduce_ls import ResidualWeights, assemble_normal, pathwise_residuals
from .reduce_projected import ProjectedSystem, assemble_projected
from .solve import (
    DEFAULT_RCOND,
    RegularizationSpec,
    SolveReport,
    _json_float,
    condition_estimate,
    solve_reduced,
)
from .errors import DimensionMismatchError
from .tensors import (
    HedgeCoefficients,
    HedgeRatioMatrix,
    as_array,
    check_finite,
    validate_problem,
)

__all__ = [
    "ResidualReport",
    "MethodResult",
    "FormulationComparison",
    "residual_report",
    "pathwise_oracle_solve",
    "pathwise_conditioning",
    "regress_pathwise",
    "compare_formulations",
]


@dataclass(eq=False)
class ResidualReport:
    full_residual: float
    per_path_norms: np.ndarray
    projected_residual: Optional[float] = None
    tested_moments: Optional[float] = None

    def to_dict(self, per_path: bool = False) -> dict:
        d = {
            "full_residual": float(self.full_residual),
            "max_path_norm": float(np.max(self.per_path_norms)),
            "projected_residual": self.projected_residual,
            "tested_moments": self.tested_moments,
        }
        if per_path:
            d["per_path_norms"] = [float(v) for v in self.per_path_norms]
        return d


def residual_report(coeffs: HedgeCoefficients, A, b, X, Y=None,
                    system: Optional[ProjectedSystem] = None, W=None) -> ResidualReport:
    """Full pathwise residual, per-path norms and, given a test basis, the projected residuals.

    ``full_residual`` is ``(1/N) sum_l ||W_l R_l||^2``; per-path norms are of the
    unweighted residual. ``tested_moments`` is ``max |<R_i, Y_s>_N|``.
    """
    validate_problem(A, b, X, Y)
    R = pathwise_residuals(coeffs, A, b, X)
    Rw = R
    if W is not None:
        W = W if isinstance(W, ResidualWeights) else ResidualWeights(W)
        W.check(R.shape[0], R.shape[1])
        Rw = np.einsum("lik,lk->li", W.matrices, R) if W.per_path else R @ W.matrices.T
    N = R.shape[0]
    report = ResidualReport(float(np.sum(Rw * Rw) / N), np.linalg.norm(R, axis=1))
    if Y is not None:
        Yv = as_array(Y)
        report.tested_moments = float(np.max(np.abs(Yv.T @ R / N)))
        if system is None:
            system = assemble_projected(A, b, X, Y)
    if system is not None:
        report.projected_residual = float(np.linalg.norm(system.residual(coeffs.flat())))
    return report


def pathwise_oracle_solve(A, b, rcond: float = DEFAULT_RCOND) -> HedgeRatioMatrix:
    """Minimum-norm least-squares solution of ``A_l phi_l = b_l`` on every path separately."""
    A, b = as_array(A), as_array(b)
    if A.ndim != 3 or b.shape != A.shape[:2]:
        raise DimensionMismatchError("(N, n)", A.shape[:2], b.shape, "b")
    check_finite("A", A)
    check_finite("b", b)
    pinv = np.linalg.pinv(A, rcond=rcond)
    return HedgeRatioMatrix(np.einsum("lji,li->lj", pinv, b))


def pathwise_conditioning(A, rcond: float = DEFAULT_RCOND) -> tuple[np.ndarray, np.ndarray]:
    """Per-path condition numbers and numerical ranks of ``A_l`` (``inf`` when deficient)."""
    s = np.linalg.svd(as_array(A), compute_uv=False)
    top = s[:, :1]
    rank = np.sum(s > rcond * top, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(rank == s.shape[1], top[:, 0] / s[:, -1], np.inf)
    return cond, rank


def regress_pathwise(phi, basis) -> HedgeCoefficients:
    """Project pathwise hedge ratios onto the solution basis, one instrument at a time."""
    Phi = as_array(phi)
    X = as_array(basis)
    if Phi.ndim != 2 or Phi.shape[0] != X.shape[0]:
        raise DimensionMismatchError("N", X.shape[0], Phi.shape, "pathwise hedge ratios")
    N = X.shape[0]
    moments = X.T @ Phi / N  # (r, m)
    G = X.T @ X / N
    if np.max(np.abs(G - np.eye(G.shape[0]))) > 1e-10:
        moments = np.linalg.lstsq(G, moments, rcond=None)[0]
    return HedgeCoefficients(moments.T, getattr(basis, "basis_id", None))


@dataclass(eq=False)
class MethodResult:
    coefficients: HedgeCoefficients
    residuals: ResidualReport
    condition_estimate: float
    solve_report: Optional[SolveReport] = None

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.values.tolist(),
            "full_residual": float(self.residuals.full_residual),
            "projected_residual": self.residuals.projected_residual,
            "tested_moments": self.residuals.tested_moments,
            "condition_estimate": _json_float(self.condition_estimate),
            "solve_report": None if self.solve_report is None else self.solve_report.to_dict(),
        }


@dataclass(eq=False)
class FormulationComparison:
    methods: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> MethodResult:
        return self.methods[key]

    def to_dict(self) -> dict:
        return {name: res.to_dict() for name, res in self.methods.items()}

    def table(self) -> str:
        lines = [f"{'method':<22}{'full residual':>16}{'projected':>14}{'condition':>12}"]
        for name, res in self.methods.items():
            rr = res.residuals
            lines.append(f"{name:<22}{rr.full_residual:>16.6g}"
                         f"{(rr.projected_residual or 0.0):>14.3g}{res.condition_estimate:>12.3g}")
        return "\n".join(lines)


def compare_formulations(A, b, X, Y=None, reg: Optional[RegularizationSpec] = None, W=None,
                         *, solve_mode: str = "auto", **assembly) -> FormulationComparison:
    """Fit empirical L2, projected and regression-after-pathwise on the same data.

    Every method is diagnosed against the same projected system (Galerkin when
    ``Y`` is omitted), so their residual columns are directly comparable.
    """
    Yb = X if Y is None else Y
    validate_problem(A, b, X, Yb)
    basis_id = getattr(X, "basis_id", None)
    proj = assemble_projected(A, b, X, Yb, **assembly)
    out = FormulationComparison()

    normal = assemble_normal(A, b, X, W, **assembly)
    xi, rep = solve_reduced(normal, reg, basis_id)
    out.methods["ls"] = MethodResult(xi, residual_report(xi, A, b, X, Yb, proj, W),
                                     rep.condition_estimate, rep)

    xi, rep = solve_reduced(proj, reg, basis_id, mode=solve_mode)
    out.methods["projected"] = MethodResult(xi, residual_report(xi, A, b, X, Yb, proj, W),
                                            condition_estimate(proj.B_flat), rep)

    phi = pathwise_oracle_solve(A, b)
    xi = regress_pathwise(phi, X)
    cond, _ = pathwise_conditioning(A)
    out.methods["pathwise-regression"] = MethodResult(
        xi, residual_report(xi, A, b, X, Yb, proj, W), float(np.max(cond)))
    return out
