"""Random problem generators and loop-based oracles shared by the test modules."""

import numpy as np

from reducedhedge.basis import orthonormalize
from reducedhedge.tensors import flatten_col, flatten_row


def random_problem(g, N=20, n=2, m=2, r=3, p=None, orthonormal=True):
    A = g.normal(size=(N, n, m))
    b = g.normal(size=(N, n))
    Z = np.column_stack([np.ones(N), g.normal(size=(N, r - 1))])
    X = orthonormalize(Z) if orthonormal else Z
    if p is None:
        return A, b, X
    Y = orthonormalize(np.column_stack([np.ones(N), g.normal(size=(N, p - 1))]))
    return A, b, X, Y


def exact_problem(g, N, n, m, r):
    """Instance with ``b = A phi`` for known coefficients; returns (A, b, X, xi_star)."""
    A = g.normal(size=(N, n, m))
    X = orthonormalize(np.column_stack([np.ones(N), g.normal(size=(N, r - 1))]))
    xi = g.normal(size=(m, r))
    phi = X.ortho_values @ xi.T
    b = np.einsum("lij,lj->li", A, phi)
    return A, b, X, xi


def design_by_loops(A, X):
    """Explicit design matrix, rows (l, i) path-major, columns via the 1-based column map."""
    A = np.asarray(A)
    X = np.asarray(getattr(X, "ortho_values", X))
    N, n, m = A.shape
    r = X.shape[1]
    D = np.zeros((N * n, m * r))
    for l in range(N):
        for i in range(n):
            for j in range(m):
                for q in range(r):
                    D[l * n + i, flatten_col(j + 1, q + 1, m) - 1] = A[l, i, j] * X[l, q]
    return D


def projected_by_loops(A, b, X, Y):
    A, b = np.asarray(A), np.asarray(b)
    X = np.asarray(getattr(X, "ortho_values", X))
    Y = np.asarray(getattr(Y, "ortho_values", Y))
    N, n, m = A.shape
    r, p = X.shape[1], Y.shape[1]
    B = np.zeros((n * p, m * r))
    beta = np.zeros(n * p)
    for i in range(n):
        for s in range(p):
            row = flatten_row(i + 1, s + 1, n) - 1
            beta[row] = sum(b[l, i] * Y[l, s] for l in range(N)) / N
            for j in range(m):
                for q in range(r):
                    B[row, flatten_col(j + 1, q + 1, m) - 1] = sum(
                        A[l, i, j] * X[l, q] * Y[l, s] for l in range(N)) / N
    return B, beta


def ls_objective_by_loops(xi, A, b, X):
    A, b = np.asarray(A), np.asarray(b)
    X = np.asarray(getattr(X, "ortho_values", X))
    N, n, m = A.shape
    total = 0.0
    for l in range(N):
        phi = [sum(xi[j, q] * X[l, q] for q in range(X.shape[1])) for j in range(m)]
        for i in range(n):
            res = sum(A[l, i, j] * phi[j] for j in range(m)) - b[l, i]
            total += res * res
    return total / N
