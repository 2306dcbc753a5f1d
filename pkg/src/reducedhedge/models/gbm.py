"""Toy Black-Scholes market producing pathwise sensitivities for hedge reduction.

Paths follow the exact log-normal scheme, driven by counter-based normals so
path ``l`` is the same for any path count. Discounting is deterministic,
``D(t, T) = exp(-rate (T - t))``. Primitive sensitivities ``b`` come from
forward-mode dual numbers pushed through the discounted payoff; instrument
sensitivities ``A`` from the same machinery applied to instrument prices.

State variables exposed to bases: ``S_t`` (spot at the observation time),
``S_T`` (spot at the product maturity) and ``D_tT`` (discount factor from the
observation time to the horizon). Primitives are ``S_t`` and ``D_tT``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from ..errors import ConfigError
from ..tensors import PrimitiveSensitivities, SensitivityTensor
from . import dual
from .dual import DualNumber
from .rng import standard_normals

__all__ = [
    "GbmModel",
    "ProductSpec",
    "InstrumentSpec",
    "PathStates",
    "PRIMITIVES",
    "simulate",
    "discounted_value",
    "primitive_sensitivities",
    "instrument_prices",
    "hedge_instrument_sensitivities",
    "kink_paths",
    "bs_call_delta",
    "bs_call_price",
    "analytic_call_delta",
]

PRIMITIVES = ("S_t", "D_tT")


@dataclass(frozen=True)
class GbmModel:
    spot: float
    rate: float
    volatility: float
    horizon: float
    observation_time: float = 0.0
    n_steps: int = 1
    n_paths: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.spot > 0:
            raise ConfigError(f"spot must be positive, got {self.spot}")
        if not self.volatility >= 0:
            raise ConfigError(f"volatility must be non-negative, got {self.volatility}")
        if not 0 <= self.observation_time < self.horizon:
            raise ConfigError("need 0 <= observation_time < horizon")
        if not np.isfinite(self.rate):
            raise ConfigError("rate must be finite")
        if self.n_steps < 1 or self.n_paths < 1 or self.seed < 0:
            raise ConfigError("n_steps, n_paths must be >= 1 and seed >= 0")

    def time_grid(self, extra: Sequence[float] = ()) -> np.ndarray:
        grid = np.linspace(0.0, self.horizon, self.n_steps + 1)
        return np.unique(np.concatenate([grid, [self.observation_time], np.asarray(extra, float)]))

    def discount(self, start: float, end: float) -> float:
        return float(np.exp(-self.rate * (end - start)))


@dataclass(frozen=True)
class ProductSpec:
    kind: str  # "forward" | "european-call"
    strike: float
    maturity: float | None = None  # defaults to the model horizon

    def __post_init__(self):
        if self.kind not in ("forward", "european-call"):
            raise ConfigError(f"unknown product kind {self.kind!r}")
        if not np.isfinite(self.strike):
            raise ConfigError("strike must be finite")

    def maturity_for(self, model: GbmModel) -> float:
        T = model.horizon if self.maturity is None else float(self.maturity)
        if not model.observation_time < T <= model.horizon:
            raise ConfigError(f"product maturity {T} must lie in (t, horizon]")
        return T


@dataclass(frozen=True)
class InstrumentSpec:
    """A hedge instrument priced from the primitives.

    ``stock``: ``scale * S_t``. ``bond``: zero-coupon bond to the horizon,
    ``scale * D_tT``. ``bs-call``: ``scale`` Black-Scholes calls on the stock
    expiring at the horizon with the given strike and volatility.
    """

    kind: str
    scale: float = 1.0
    strike: float | None = None
    volatility: float | None = None

    def __post_init__(self):
        if self.kind not in ("stock", "bond", "bs-call"):
            raise ConfigError(f"unknown instrument {self.kind!r}")
        if self.kind == "bs-call" and self.strike is None:
            raise ConfigError("bs-call instrument needs a strike")


@dataclass(frozen=True, eq=False)
class PathStates:
    times: np.ndarray
    log_spot: np.ndarray  # (N, len(times))
    model: GbmModel

    @property
    def n_paths(self) -> int:
        return self.log_spot.shape[0]

    def _index(self, time: float) -> int:
        k = int(np.searchsorted(self.times, time - 1e-14))
        if k >= len(self.times) or abs(self.times[k] - time) > 1e-14:
            raise ValueError(f"time {time} not on the simulation grid")
        return k

    def spot_at(self, time: float) -> np.ndarray:
        return np.exp(self.log_spot[:, self._index(time)])

    def log_growth(self, start: float, end: float) -> np.ndarray:
        return self.log_spot[:, self._index(end)] - self.log_spot[:, self._index(start)]

    def as_dict(self) -> dict:
        m = self.model
        s_t = self.spot_at(m.observation_time)
        return {
            "S_t": s_t,
            "S_T": self.spot_at(m.horizon),
            "D_tT": np.full(self.n_paths, m.discount(m.observation_time, m.horizon)),
        }


def simulate(model: GbmModel, extra_times: Sequence[float] = (),
             paths: Sequence[int] | None = None) -> PathStates:
    """Exact-scheme GBM paths. ``paths`` selects path indices (default ``0..N-1``)."""
    times = model.time_grid(extra_times)
    idx = np.arange(model.n_paths) if paths is None else np.asarray(paths, dtype=np.int64)
    drift = model.rate - 0.5 * model.volatility**2
    log_s = np.empty((idx.size, times.size))
    log_s[:, 0] = np.log(model.spot)
    for k in range(1, times.size):
        dt = times[k] - times[k - 1]
        inc = drift * dt
        if model.volatility > 0:
            inc = inc + model.volatility * np.sqrt(dt) * standard_normals(model.seed, idx, k - 1)
        log_s[:, k] = log_s[:, k - 1] + inc
    return PathStates(times, log_s, model)


def _check_primitives(primitives: Sequence[str]) -> None:
    unknown = [p for p in primitives if p not in PRIMITIVES]
    if unknown or not primitives:
        raise ConfigError(f"primitives {unknown or '[]'} not in the declared set {PRIMITIVES}")
    if len(set(primitives)) != len(primitives):
        raise ConfigError("duplicate primitives")


def _seeded(states: PathStates, primitives: Sequence[str], s_t=None, d_tT=None):
    m = states.model
    base = states.as_dict()
    s_t = base["S_t"] if s_t is None else s_t
    d_tT = base["D_tT"] if d_tT is None else d_tT
    k = len(primitives)
    out = {}
    for name, val in (("S_t", s_t), ("D_tT", d_tT)):
        if name in primitives:
            out[name] = DualNumber.variable(val, primitives.index(name), k)
        else:
            out[name] = DualNumber.constant(val, k)
    return out


def _discounted_payoff(states: PathStates, product: ProductSpec, S: DualNumber,
                       D: DualNumber) -> DualNumber:
    m = states.model
    t, T = m.observation_time, m.horizon
    Tp = product.maturity_for(m)
    s_mat = S * np.exp(states.log_growth(t, Tp))
    # flat rate: D(t, Tp) = D(t, T) ** ((Tp - t) / (T - t))
    disc = D if Tp == T else D ** ((Tp - t) / (T - t))
    if product.kind == "forward":
        payoff = s_mat - product.strike
    else:
        payoff = dual.maximum(s_mat - product.strike, 0.0)
    return disc * payoff


def discounted_value(states: PathStates, product: ProductSpec, s_t=None, d_tT=None) -> np.ndarray:
    """Pathwise ``V(t) = D(t, Tp) payoff(S(Tp))`` as plain floats, optionally with bumped primitives."""
    x = _seeded(states, ["S_t"], s_t, d_tT)
    return _discounted_payoff(states, product, x["S_t"], x["D_tT"]).value


def primitive_sensitivities(states: PathStates, product: ProductSpec,
                            primitives: Sequence[str] = PRIMITIVES) -> PrimitiveSensitivities:
    """``b[l, i] = dV / dM_i`` on every path by dual-number propagation."""
    primitives = list(primitives)
    _check_primitives(primitives)
    x = _seeded(states, primitives)
    V = _discounted_payoff(states, product, x["S_t"], x["D_tT"])
    return PrimitiveSensitivities(V.derivs)


def _instrument_price(inst: InstrumentSpec, S: DualNumber, D: DualNumber,
                      model: GbmModel) -> DualNumber:
    if inst.kind == "stock":
        return S * inst.scale
    if inst.kind == "bond":
        return D * inst.scale
    vol = model.volatility if inst.volatility is None else inst.volatility
    tau = model.horizon - model.observation_time
    sd = vol * np.sqrt(tau)
    if sd <= 0:
        raise ConfigError("bs-call instrument needs positive volatility")
    d1 = (dual.log(S / (D * inst.strike)) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    return (S * dual.norm_cdf(d1) - D * inst.strike * dual.norm_cdf(d2)) * inst.scale


def instrument_prices(states: PathStates, instruments: Sequence[InstrumentSpec]) -> np.ndarray:
    x = _seeded(states, list(PRIMITIVES))
    cols = [_instrument_price(i, x["S_t"], x["D_tT"], states.model).value for i in instruments]
    return np.column_stack(cols)


def hedge_instrument_sensitivities(states: PathStates, instruments: Sequence[InstrumentSpec],
                                   primitives: Sequence[str] = PRIMITIVES) -> SensitivityTensor:
    """``A[l, i, j] = dP_j / dM_i`` on every path."""
    primitives = list(primitives)
    _check_primitives(primitives)
    if not instruments:
        raise ConfigError("at least one hedge instrument is required")
    for inst in instruments:
        if not isinstance(inst, InstrumentSpec):
            raise ConfigError(f"unknown instrument {inst!r}")
    x = _seeded(states, primitives)
    cols = [_instrument_price(i, x["S_t"], x["D_tT"], states.model).derivs for i in instruments]
    return SensitivityTensor(np.stack(cols, axis=-1))


def kink_paths(states: PathStates, product: ProductSpec, band: float = 1e-3) -> np.ndarray:
    """Indices of paths whose terminal spot lies within ``band * strike`` of a payoff kink."""
    if product.kind != "european-call":
        return np.zeros(0, dtype=np.int64)
    m = states.model
    s_mat = states.spot_at(m.observation_time) * np.exp(
        states.log_growth(m.observation_time, product.maturity_for(m)))
    return np.flatnonzero(np.abs(s_mat - product.strike) <= band * abs(product.strike))


def bs_call_price(S, K: float, rate: float, sigma: float, tau: float):
    S = np.asarray(S, dtype=np.float64)
    sd = sigma * np.sqrt(tau)
    d1 = (np.log(S / K) + (rate + 0.5 * sigma**2) * tau) / sd
    return S * ndtr(d1) - K * np.exp(-rate * tau) * ndtr(d1 - sd)


def bs_call_delta(S, K: float, rate: float, sigma: float, tau: float):
    """Black-Scholes call delta ``N(d1)``; the ``sigma = 0`` limit is the in-the-money indicator."""
    S = np.asarray(S, dtype=np.float64)
    if sigma == 0 or tau == 0:
        return (S * np.exp(rate * tau) > K).astype(np.float64)
    d1 = (np.log(S / K) + (rate + 0.5 * sigma**2) * tau) / (sigma * np.sqrt(tau))
    return ndtr(d1)


def analytic_call_delta(model: GbmModel, strike: float) -> float:
    """Time-zero delta of a call maturing at the model horizon."""
    if model.observation_time != 0:
        raise ValueError("analytic_call_delta is defined for observation_time = 0")
    return float(bs_call_delta(model.spot, strike, model.rate, model.volatility, model.horizon))
