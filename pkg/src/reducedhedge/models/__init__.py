"""Monte-Carlo market models and forward-mode differentiation."""

from .dual import DualNumber
from .gbm import (
    PRIMITIVES,
    GbmModel,
    InstrumentSpec,
    PathStates,
    ProductSpec,
    analytic_call_delta,
    bs_call_delta,
    bs_call_price,
    discounted_value,
    hedge_instrument_sensitivities,
    instrument_prices,
    kink_paths,
    primitive_sensitivities,
    simulate,
)
from .rng import standard_normals

__all__ = [
    "DualNumber",
    "PRIMITIVES",
    "GbmModel",
    "InstrumentSpec",
    "PathStates",
    "ProductSpec",
    "analytic_call_delta",
    "bs_call_delta",
    "bs_call_price",
    "discounted_value",
    "hedge_instrument_sensitivities",
    "instrument_prices",
    "kink_paths",
    "primitive_sensitivities",
    "simulate",
    "standard_normals",
]
