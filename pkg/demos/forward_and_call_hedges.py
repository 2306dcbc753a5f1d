"""
Forward and call hedges on Black-Scholes paths
==============================================

Simulate geometric Brownian paths, differentiate the discounted payoff with
dual numbers, then fit a hedge in the stock.

At time zero every basis collapses to the constant, so the fitted hedge is a
single number. For the forward it should be 1; for the call it should be the
Black-Scholes delta N(d1).
"""

import numpy as np

from reducedhedge import fit_least_squares, orthonormalize, evaluate_basis, polynomial_spec, reconstruct_hedge
from reducedhedge.models import (
    GbmModel,
    InstrumentSpec,
    ProductSpec,
    analytic_call_delta,
    bs_call_delta,
    hedge_instrument_sensitivities,
    primitive_sensitivities,
    simulate,
)

model = GbmModel(spot=100.0, rate=0.05, volatility=0.2, horizon=1.0, n_paths=100_000, seed=1)
paths = simulate(model)
stock = [InstrumentSpec("stock")]
A = hedge_instrument_sensitivities(paths, stock, ["S_t"])  # identically 1
one = np.ones((model.n_paths, 1))

for product in (ProductSpec("forward", 100.0), ProductSpec("european-call", 100.0)):
    b = primitive_sensitivities(paths, product, ["S_t"])
    xi, report = fit_least_squares(A, b, one)
    se = b.values[:, 0].std(ddof=1) / np.sqrt(model.n_paths)
    print(f"{product.kind:>14}: xi = {xi.values[0, 0]:.5f} +/- {se:.5f}")
print(f"analytic call delta   {analytic_call_delta(model, 100.0):.5f}")

# %%
# Later in the life of the trade the hedge depends on where the stock is.
# A cubic in S(t) gives a state-dependent hedge ratio; compare it with the
# Black-Scholes delta over the remaining maturity.

t = 0.25
later = GbmModel(spot=100.0, rate=0.05, volatility=0.2, horizon=1.0, observation_time=t,
                 n_paths=100_000, seed=2)
paths = simulate(later)
states = paths.as_dict()
call = ProductSpec("european-call", 100.0)
b = primitive_sensitivities(paths, call, ["S_t"])
A = hedge_instrument_sensitivities(paths, stock, ["S_t"])
spec = polynomial_spec("S_t", 3, scale=20.0, center=100.0)
X = orthonormalize(evaluate_basis(spec, states), spec=spec)
xi, _ = fit_least_squares(A, b, X)

grid = {"S_t": np.linspace(80.0, 125.0, 10)}
fitted = (evaluate_basis(spec, grid) @ X.transform) @ xi.values[0]
exact = bs_call_delta(grid["S_t"], 100.0, 0.05, 0.2, 1.0 - t)
for s, f, e in zip(grid["S_t"], fitted, exact):
    print(f"S(t) = {s:6.1f}   fitted {f:.4f}   Black-Scholes {e:.4f}")

phi = reconstruct_hedge(xi, X)
print("hedge ratio matrix:", phi.values.shape)
