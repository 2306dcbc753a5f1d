"""
Choosing the ridge weight out of sample
=======================================

A rich basis on few paths overfits. Tikhonov shrinkage trades in-sample fit
for stability; the held-out residual shows where the trade pays off.
"""

import numpy as np

from reducedhedge import RegularizationSpec, fit_least_squares, ls_objective, orthonormalize

g = np.random.default_rng(3)


def sample(N):
    s = g.lognormal(sigma=0.3, size=N)
    A = np.stack([np.ones(N), 0.5 + 0.2 * s], axis=-1)[:, None, :]  # one primitive, two instruments
    true = np.column_stack([np.tanh(s - 1.0), 0.3 * s])
    b = np.einsum("lij,lj->li", A, true) + 0.3 * g.normal(size=(N, 1))
    return s, A, b


def features(s):
    return np.column_stack([s**k for k in range(8)])


s, A, b = sample(150)
basis = orthonormalize(features(s))
s_new, A_new, b_new = sample(20_000)
X_new = features(s_new) @ basis.transform

print(f"{'lambda':>10} {'|z|':>10} {'in-sample':>12} {'held-out':>12}")
for lam in [0.0, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]:
    xi, report = fit_least_squares(A, b, basis, RegularizationSpec(lam))
    print(f"{lam:10.0e} {np.linalg.norm(xi.flat()):10.4f} "
          f"{ls_objective(xi, A, b, basis):12.5f} {ls_objective(xi, A_new, b_new, X_new):12.5f}")
