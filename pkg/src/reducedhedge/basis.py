"""Solution and test bases evaluated on simulated states.

A basis is described by a :class:`BasisSpec` (an ordered feature list),
evaluated on a mapping ``name -> per-path array`` into a raw matrix ``Z``, and
orthonormalised in the empirical inner product ``<U, V>_N = mean(U * V)``.
The orthonormalising transform ``T`` is kept so that ``X = Z @ T`` can be
rebuilt on new states.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, MissingStateError, NonFiniteError
from .tensors import check_finite

__all__ = [
    "Constant",
    "Monomial",
    "Product",
    "Indicator",
    "BasisSpec",
    "BasisSet",
    "GramMatrix",
    "polynomial_spec",
    "feature_from_dict",
    "empirical_inner",
    "evaluate_basis",
    "gram",
    "orthonormalize",
    "project",
    "path_indicator_basis",
]


def _state(states: Mapping[str, np.ndarray], var: str) -> np.ndarray:
    try:
        return np.asarray(states[var], dtype=np.float64)
    except KeyError:
        raise MissingStateError(f"state variable {var!r} not present") from None


@dataclass(frozen=True)
class Constant:
    kind = "constant"

    def evaluate(self, states, n_paths: int) -> np.ndarray:
        return np.ones(n_paths)

    def variables(self) -> set:
        return set()

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Monomial:
    """``((x - center) / scale) ** degree`` of one state variable."""

    var: str
    degree: int
    scale: float = 1.0
    center: float = 0.0
    kind = "monomial"

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"monomial degree must be a non-negative integer, got {self.degree}")
        if not np.isfinite(self.scale) or self.scale == 0 or not np.isfinite(self.center):
            raise ValueError("monomial scale must be finite and non-zero, center finite")

    def evaluate(self, states, n_paths: int) -> np.ndarray:
        x = (_state(states, self.var) - self.center) / self.scale
        return x ** int(self.degree)

    def variables(self) -> set:
        return {self.var}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "var": self.var, "degree": int(self.degree),
                "scale": float(self.scale), "center": float(self.center)}


@dataclass(frozen=True)
class Product:
    factors: tuple
    kind = "product"

    def __post_init__(self):
        if not self.factors:
            raise ValueError("product feature needs at least one factor")

    def evaluate(self, states, n_paths: int) -> np.ndarray:
        out = np.ones(n_paths)
        for f in self.factors:
            out = out * f.evaluate(states, n_paths)
        return out

    def variables(self) -> set:
        return set().union(*(f.variables() for f in self.factors))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "factors": [f.to_dict() for f in self.factors]}


@dataclass(frozen=True)
class Indicator:
    """``1{x > threshold}``, or ``1{x <= threshold}`` when ``above`` is false."""

    var: str
    threshold: float
    above: bool = True
    kind = "indicator"

    def __post_init__(self):
        if not np.isfinite(self.threshold):
            raise ValueError("indicator threshold must be finite")

    def evaluate(self, states, n_paths: int) -> np.ndarray:
        x = _state(states, self.var)
        hit = x > self.threshold if self.above else x <= self.threshold
        return hit.astype(np.float64)

    def variables(self) -> set:
        return {self.var}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "var": self.var, "threshold": float(self.threshold),
                "above": bool(self.above)}


Feature = Union[Constant, Monomial, Product, Indicator]


def feature_from_dict(d: Mapping) -> Feature:
    kind = d.get("kind")
    if kind == "constant":
        return Constant()
    if kind == "monomial":
        return Monomial(str(d["var"]), int(d["degree"]), float(d.get("scale", 1.0)),
                        float(d.get("center", 0.0)))
    if kind == "product":
        return Product(tuple(feature_from_dict(f) for f in d["factors"]))
    if kind == "indicator":
        return Indicator(str(d["var"]), float(d["threshold"]), bool(d.get("above", True)))
    raise ValueError(f"unknown feature kind {kind!r}")


@dataclass(frozen=True)
class BasisSpec:
    """Ordered feature list plus a label for the information set it uses.

    The label is recorded, never checked: keeping features adapted to the
    hedge time is up to the caller.
    """

    features: tuple
    measurability_tag: str = "t"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValueError("basis spec needs at least one feature")

    def __len__(self):
        return len(self.features)

    def variables(self) -> set:
        return set().union(*(f.variables() for f in self.features))

    def to_dict(self) -> dict:
        return {"features": [f.to_dict() for f in self.features],
                "measurability_tag": self.measurability_tag}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BasisSpec":
        return cls(tuple(feature_from_dict(f) for f in d["features"]),
                   str(d.get("measurability_tag", "t")))


def polynomial_spec(var: str, degree: int, scale: float = 1.0, center: float = 0.0,
                    measurability_tag: str = "t") -> BasisSpec:
    """Constant plus monomials of ``var`` up to ``degree``."""
    feats = [Constant()] + [Monomial(var, d, scale, center) for d in range(1, degree + 1)]
    return BasisSpec(tuple(feats), measurability_tag)


def empirical_inner(U, V) -> float:
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.shape != V.shape or U.ndim != 1:
        raise DimensionMismatchError("N", U.shape, V.shape, "empirical inner product")
    check_finite("U", U)
    check_finite("V", V)
    return float(np.dot(U, V) / U.shape[0])


def evaluate_basis(spec: BasisSpec, states: Mapping[str, np.ndarray]) -> np.ndarray:
    """Raw basis matrix ``Z[l, q]``: feature ``q`` evaluated on path ``l``."""
    missing = sorted(v for v in spec.variables() if v not in states)
    if missing:
        raise MissingStateError(f"state variable(s) {missing} not present")
    sizes = {np.asarray(states[v]).shape for v in spec.variables()} or {
        np.asarray(next(iter(states.values()))).shape}
    if len(sizes) != 1:
        raise DimensionMismatchError("N", "equal lengths", sorted(sizes), "state variables")
    (shape,) = sizes
    n_paths = shape[0]
    Z = np.column_stack([f.evaluate(states, n_paths) for f in spec.features])
    check_finite("Z", Z)
    return Z


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values)[0])


def gram(Z) -> GramMatrix:
    """Empirical Gram matrix ``<Z_k, Z_q>_N``."""
    Z = np.asarray(getattr(Z, "ortho_values", Z), dtype=np.float64)
    if Z.ndim != 2:
        raise DimensionMismatchError("ndim", 2, Z.ndim, "Z")
    check_finite("Z", Z)
    G = Z.T @ Z / Z.shape[0]
    return GramMatrix(0.5 * (G + G.T))


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Raw values ``Z``, transform ``T`` and orthonormal values ``X = Z @ T``."""

    raw_values: np.ndarray
    transform: np.ndarray
    ortho_values: np.ndarray
    basis_id: str
    dropped: tuple = ()
    spec: Optional[BasisSpec] = None

    @property
    def n_paths(self) -> int:
        return self.ortho_values.shape[0]

    @property
    def size(self) -> int:
        return self.ortho_values.shape[1]

    def evaluate(self, states: Mapping[str, np.ndarray]) -> np.ndarray:
        """Orthonormal-basis values on new states, reusing the stored transform."""
        if self.spec is None:
            raise ValueError("basis has no feature spec; cannot evaluate on new states")
        return evaluate_basis(self.spec, states) @ self.transform


def _basis_id(spec: Optional[BasisSpec], Z: np.ndarray, T: np.ndarray) -> str:
    h = hashlib.sha256()
    if spec is not None:
        h.update(json.dumps(spec.to_dict(), sort_keys=True).encode())
    else:
        h.update(b"raw:")
        h.update(np.ascontiguousarray(Z).tobytes())
    h.update(np.ascontiguousarray(T).tobytes())
    return h.hexdigest()[:16]


def orthonormalize(Z, drop_tol: float = 1e-8, spec: Optional[BasisSpec] = None) -> BasisSet:
    """Empirically orthonormalise the columns of ``Z``.

    Modified Gram-Schmidt with one reorthogonalisation pass. A column whose
    residual norm falls below ``drop_tol`` times the largest column norm is
    dropped. The returned values are formed as ``Z @ T`` so that
    out-of-sample evaluation reproduces them exactly.
    """
    Z = np.array(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 1 or Z.shape[1] < 1:
        raise DimensionMismatchError("shape", "N >= 1, r >= 1", Z.shape, "Z")
    check_finite("Z", Z)
    N, r = Z.shape
    norms = np.sqrt(np.mean(Z * Z, axis=0))
    ref = norms.max()
    qs, ts, dropped = [], [], []
    for k in range(r):
        v = Z[:, k].copy()
        t = np.zeros(r)
        t[k] = 1.0
        for _ in range(2):
            for qv, tq in zip(qs, ts):
                c = np.dot(qv, v) / N
                v -= c * qv
                t -= c * tq
        nv = np.sqrt(np.dot(v, v) / N)
        if ref == 0.0 or nv <= drop_tol * ref:
            dropped.append(k)
            continue
        qs.append(v / nv)
        ts.append(t / nv)
    if not qs:
        raise ValueError("all basis columns dropped; basis is empty")
    T = np.column_stack(ts)
    X = Z @ T
    # Z @ T drifts from the MGS columns when Z is badly scaled; polish with Cholesky.
    for _ in range(3):
        G = X.T @ X / N
        if np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-12:
            break
        L = np.linalg.cholesky(0.5 * (G + G.T))
        T = np.linalg.solve(L, T.T).T
        X = Z @ T
    return BasisSet(Z, T, X, _basis_id(spec, Z, T), tuple(dropped), spec)


def project(U, basis) -> tuple[np.ndarray, np.ndarray]:
    """Empirical orthogonal projection of ``U`` onto an orthonormal basis.

    Returns the coefficients ``<U, X_s>_N`` and the fitted path vector.
    """
    X = np.asarray(getattr(basis, "ortho_values", basis), dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 1 or U.shape[0] != X.shape[0]:
        raise DimensionMismatchError("N", X.shape[0], U.shape, "projected vector")
    check_finite("U", U)
    c = X.T @ U / X.shape[0]
    return c, X @ c


def path_indicator_basis(n_paths: int) -> np.ndarray:
    """Scaled path indicators ``sqrt(N) 1{l = q}``; empirically orthonormal."""
    return np.sqrt(n_paths) * np.eye(n_paths)
