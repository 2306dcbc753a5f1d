"""Forward-mode dual numbers carrying a gradient over a fixed seed set.

``value`` may be a scalar or an array of per-path values; ``derivs`` then has
one trailing axis holding the partials with respect to each seeded input.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

__all__ = ["DualNumber", "exp", "log", "sqrt", "maximum", "norm_cdf"]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class DualNumber:
    __slots__ = ("value", "derivs")

    def __init__(self, value, derivs):
        self.value = np.asarray(value, dtype=np.float64)
        self.derivs = np.asarray(derivs, dtype=np.float64)
        if self.derivs.shape[:-1] != self.value.shape:
            raise ValueError(
                f"derivative shape {self.derivs.shape} does not extend value shape {self.value.shape}"
            )

    @classmethod
    def variable(cls, value, index: int, n_seeds: int) -> "DualNumber":
        """Seed ``value`` as input ``index`` of ``n_seeds``."""
        value = np.asarray(value, dtype=np.float64)
        d = np.zeros(value.shape + (n_seeds,))
        d[..., index] = 1.0
        return cls(value, d)

    @classmethod
    def constant(cls, value, n_seeds: int) -> "DualNumber":
        value = np.asarray(value, dtype=np.float64)
        return cls(value, np.zeros(value.shape + (n_seeds,)))

    @property
    def n_seeds(self) -> int:
        return self.derivs.shape[-1]

    def _lift(self, other) -> "DualNumber":
        if isinstance(other, DualNumber):
            return other
        return DualNumber.constant(np.broadcast_to(other, np.broadcast_shapes(
            np.shape(other), self.value.shape)), self.n_seeds)

    def _chain(self, value, slope) -> "DualNumber":
        return DualNumber(value, self.derivs * np.asarray(slope)[..., None])

    def __add__(self, other):
        o = self._lift(other)
        return DualNumber(self.value + o.value, self.derivs + o.derivs)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return DualNumber(self.value - o.value, self.derivs - o.derivs)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return DualNumber(-self.value, -self.derivs)

    def __mul__(self, other):
        o = self._lift(other)
        return DualNumber(self.value * o.value,
                          self.derivs * o.value[..., None] + o.derivs * self.value[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        v = self.value / o.value
        return DualNumber(v, (self.derivs - o.derivs * v[..., None]) / o.value[..., None])

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, k):
        if isinstance(k, DualNumber):
            return exp(log(self) * k)
        k = float(k)
        return self._chain(self.value**k, k * self.value ** (k - 1.0))

    def __repr__(self):
        return f"DualNumber(value={self.value!r}, derivs={self.derivs!r})"


def _as_dual(x) -> DualNumber:
    if not isinstance(x, DualNumber):
        raise TypeError("expected a DualNumber")
    return x


def exp(x: DualNumber) -> DualNumber:
    x = _as_dual(x)
    v = np.exp(x.value)
    return x._chain(v, v)


def log(x: DualNumber) -> DualNumber:
    x = _as_dual(x)
    return x._chain(np.log(x.value), 1.0 / x.value)


def sqrt(x: DualNumber) -> DualNumber:
    x = _as_dual(x)
    v = np.sqrt(x.value)
    return x._chain(v, 0.5 / v)


def maximum(x: DualNumber, c: float) -> DualNumber:
    """``max(x, c)``; the derivative is 1 strictly above ``c`` and 0 at or below it."""
    x = _as_dual(x)
    above = x.value > c
    return x._chain(np.where(above, x.value, c), above.astype(np.float64))


def norm_cdf(x: DualNumber) -> DualNumber:
    x = _as_dual(x)
    return x._chain(ndtr(x.value), _INV_SQRT_2PI * np.exp(-0.5 * x.value**2))
