"""
Three ways to fit one hedge ratio
=================================

Two paths, one primitive, one instrument. On path 1 the instrument moves one
for one with the primitive, on path 2 it moves twice as much. The pathwise
exposures are 1 and 4, so the exact per-path hedges are 1 and 2.

A single deterministic hedge ratio cannot match both paths. The formulations
disagree on which compromise to take.
"""

import numpy as np

from reducedhedge import compare_formulations

A = np.array([1.0, 2.0]).reshape(2, 1, 1)  # (paths, primitives, instruments)
b = np.array([[1.0], [4.0]])               # (paths, primitives)
X = np.ones((2, 1))                        # constant basis

comparison = compare_formulations(A, b, X)
print(comparison.table())

# Least squares minimises the average squared residual, so it weights the
# path with the larger instrument sensitivity more heavily: xi = 9/5.
# The Galerkin fit zeroes the average residual instead: xi = 5/3.
# Averaging the pathwise hedges (1 and 2) ignores how well each hedges: xi = 3/2.
for name, result in comparison.methods.items():
    xi = result.coefficients.values[0, 0]
    residuals = b[:, 0] - A[:, 0, 0] * xi
    print(f"{name:>20}: xi = {xi:.6f}, pathwise residuals = {residuals}")
