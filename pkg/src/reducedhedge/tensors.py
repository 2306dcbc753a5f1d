"""Containers for pathwise sensitivities, flat index maps and hedge reconstruction.

Arrays are stored path-major: axis 0 is always the Monte-Carlo path. All
containers copy their input, reject non-finite entries on construction and are
read-only afterwards.

Public index maps use 1-based indices. The flat ordering is fixed: rows are
test-index major, ``row(i, s) = (s - 1) n + i``, and columns are basis-index
major, ``col(j, q) = (q - 1) m + j``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import BasisMismatchError, CorruptFileError, DimensionMismatchError, NonFiniteError

__all__ = [
    "SensitivityTensor",
    "PrimitiveSensitivities",
    "HedgeCoefficients",
    "HedgeRatioMatrix",
    "FlatIndexMaps",
    "ProblemDims",
    "flatten_row",
    "flatten_col",
    "unflatten_row",
    "unflatten_col",
    "validate_problem",
    "reconstruct_hedge",
    "as_array",
    "write_tensor",
    "read_tensor",
    "export_tensor_csv",
]

MAGIC = b"HRTENS1"


def check_finite(name: str, arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        raise NonFiniteError(name, tuple(int(k) for k in np.argwhere(bad)[0]))


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatchError("ndim", ndim, arr.ndim, name)
    if any(d < 1 for d in arr.shape):
        raise DimensionMismatchError("shape", "all axes >= 1", arr.shape, name)
    check_finite(name, arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SensitivityTensor:
    """Hedge-instrument sensitivities ``A[l, i, j] = dP_j / dM_i`` on path ``l``."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 3, "A"))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_primitives(self) -> int:
        return self.values.shape[1]

    @property
    def n_instruments(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class PrimitiveSensitivities:
    """Pathwise value sensitivities ``b[l, i] = dV / dM_i``."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 2, "b"))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_primitives(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class HedgeCoefficients:
    """Coefficient matrix ``xi[j, q]`` (instrument ``j``, basis function ``q``).

    ``basis_id`` ties the coefficients to the basis they were fitted in.
    ``None`` means the basis was supplied as a bare array and no check is made.
    """

    values: np.ndarray
    basis_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 2, "xi"))

    @property
    def n_instruments(self) -> int:
        return self.values.shape[0]

    @property
    def n_basis(self) -> int:
        return self.values.shape[1]

    def flat(self) -> np.ndarray:
        """Coefficients as a flat vector in column-map order."""
        return self.values.T.reshape(-1).copy()

    @classmethod
    def from_flat(cls, z, m: int, r: int, basis_id: Optional[str] = None) -> "HedgeCoefficients":
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (m * r,):
            raise DimensionMismatchError("mr", m * r, z.shape, "flat coefficient vector")
        return cls(z.reshape(r, m).T, basis_id)


@dataclass(frozen=True, eq=False)
class HedgeRatioMatrix:
    """Pathwise hedge ratios ``phi[l, j]``."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 2, "phi"))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_instruments(self) -> int:
        return self.values.shape[1]


def flatten_row(i: int, s: int, n: int) -> int:
    """Flat row of primitive ``i`` tested against function ``s`` (1-based)."""
    if n < 1 or not 1 <= i <= n or s < 1:
        raise IndexError(f"row index out of range: i={i}, s={s}, n={n}")
    return (s - 1) * n + i


def flatten_col(j: int, q: int, m: int) -> int:
    """Flat column of instrument ``j`` and basis function ``q`` (1-based)."""
    if m < 1 or not 1 <= j <= m or q < 1:
        raise IndexError(f"column index out of range: j={j}, q={q}, m={m}")
    return (q - 1) * m + j


def unflatten_row(k: int, n: int) -> tuple[int, int]:
    if k < 1 or n < 1:
        raise IndexError(f"flat row out of range: {k}")
    s, i = divmod(k - 1, n)
    return i + 1, s + 1


def unflatten_col(k: int, m: int) -> tuple[int, int]:
    if k < 1 or m < 1:
        raise IndexError(f"flat column out of range: {k}")
    q, j = divmod(k - 1, m)
    return j + 1, q + 1


@dataclass(frozen=True)
class FlatIndexMaps:
    """Row and column maps for a reduced system with sizes (n, p) x (m, r)."""

    n: int
    m: int
    p: int
    r: int

    def row(self, i: int, s: int) -> int:
        if s > self.p:
            raise IndexError(f"test index {s} exceeds p={self.p}")
        return flatten_row(i, s, self.n)

    def col(self, j: int, q: int) -> int:
        if q > self.r:
            raise IndexError(f"basis index {q} exceeds r={self.r}")
        return flatten_col(j, q, self.m)

    @property
    def n_rows(self) -> int:
        return self.n * self.p

    @property
    def n_cols(self) -> int:
        return self.m * self.r


class ProblemDims(NamedTuple):
    n_paths: int
    n_primitives: int
    n_instruments: int
    n_basis: int
    n_test: Optional[int]


def as_array(x, name: str = "array") -> np.ndarray:
    """Unwrap a container (or anything with ``ortho_values``) to a float array."""
    if hasattr(x, "ortho_values"):
        return x.ortho_values
    if hasattr(x, "values") and isinstance(getattr(x, "values"), np.ndarray):
        return x.values
    return np.asarray(x, dtype=np.float64)


def validate_problem(A, b, X, Y=None) -> ProblemDims:
    """Check shapes and finiteness of a reduction problem and summarise its sizes."""
    A = as_array(A)
    b = as_array(b)
    X = as_array(X)
    if A.ndim != 3:
        raise DimensionMismatchError("ndim", 3, A.ndim, "A")
    if b.ndim != 2:
        raise DimensionMismatchError("ndim", 2, b.ndim, "b")
    if X.ndim != 2:
        raise DimensionMismatchError("ndim", 2, X.ndim, "X")
    N, n, m = A.shape
    if b.shape[0] != N:
        raise DimensionMismatchError("N", N, b.shape[0], "b")
    if b.shape[1] != n:
        raise DimensionMismatchError("n", n, b.shape[1], "b")
    if X.shape[0] != N:
        raise DimensionMismatchError("N", N, X.shape[0], "X")
    p = None
    if Y is not None:
        Y = as_array(Y)
        if Y.ndim != 2:
            raise DimensionMismatchError("ndim", 2, Y.ndim, "Y")
        if Y.shape[0] != N:
            raise DimensionMismatchError("N", N, Y.shape[0], "Y")
        p = Y.shape[1]
    for name, arr in (("A", A), ("b", b), ("X", X), ("Y", Y)):
        if arr is not None:
            if min(arr.shape) < 1:
                raise DimensionMismatchError("shape", "all axes >= 1", arr.shape, name)
            check_finite(name, arr)
    return ProblemDims(N, n, m, X.shape[1], p)


def reconstruct_hedge(coeffs: HedgeCoefficients, basis) -> HedgeRatioMatrix:
    """Evaluate ``phi[l, j] = sum_q xi[j, q] X[l, q]`` on every path.

    ``basis`` is a ``BasisSet`` (its identity is checked against the
    coefficients) or a plain ``N x r`` array.
    """
    basis_id = getattr(basis, "basis_id", None)
    if basis_id is not None and coeffs.basis_id is not None and basis_id != coeffs.basis_id:
        raise BasisMismatchError(
            f"coefficients fitted in basis {coeffs.basis_id!r}, got basis {basis_id!r}"
        )
    X = as_array(basis)
    if X.ndim != 2:
        raise DimensionMismatchError("ndim", 2, X.ndim, "X")
    if X.shape[1] != coeffs.n_basis:
        raise DimensionMismatchError("r", coeffs.n_basis, X.shape[1], "basis columns")
    return HedgeRatioMatrix(X @ coeffs.values.T)


def write_tensor(path, values) -> None:
    """Write a 1-, 2- or 3-way array in the ``HRTENS1`` container format.

    Header: 7-byte magic, then the three dimensions as little-endian uint64.
    Lower-rank arrays are padded with trailing unit dimensions.
    """
    arr = np.asarray(as_array(values), dtype=np.float64)
    if arr.ndim > 3 or arr.ndim < 1:
        raise DimensionMismatchError("ndim", "1..3", arr.ndim, "tensor export")
    dims = arr.shape + (1,) * (3 - arr.ndim)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<3Q", *dims))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_tensor(path, ndim: int = 3) -> np.ndarray:
    """Read an ``HRTENS1`` file, dropping trailing axes down to ``ndim``."""
    data = Path(path).read_bytes()
    head = len(MAGIC) + 24
    if len(data) < head or data[: len(MAGIC)] != MAGIC:
        raise CorruptFileError(f"{path}: missing or truncated HRTENS1 header")
    dims = struct.unpack("<3Q", data[len(MAGIC) : head])
    count = dims[0] * dims[1] * dims[2]
    if len(data) - head != 8 * count:
        raise CorruptFileError(
            f"{path}: payload holds {len(data) - head} bytes, header promises {8 * count}"
        )
    arr = np.frombuffer(data, dtype="<f8", offset=head).astype(np.float64).reshape(dims)
    for _ in range(3 - ndim):
        if arr.shape[-1] != 1:
            raise DimensionMismatchError("ndim", ndim, 3, f"{path}")
        arr = arr[..., 0]
    return arr


def export_tensor_csv(path, A) -> None:
    """One row per (path, primitive) with the instrument sensitivities as columns."""
    A = as_array(A)
    N, n, m = A.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "primitive"] + [f"instrument_{j + 1}" for j in range(m)])
        for l in range(N):
            for i in range(n):
                w.writerow([l + 1, i + 1] + [repr(float(v)) for v in A[l, i]])
