import numpy as np
import pytest

from _instances import design_by_loops, exact_problem, random_problem
from reducedhedge.basis import orthonormalize
from reducedhedge.errors import NonFiniteError, SingularSystemError
from reducedhedge.reduce_ls import assemble_normal
from reducedhedge.reduce_projected import assemble_galerkin, assemble_projected
from reducedhedge.solve import (
    RegularizationSpec,
    condition_estimate,
    fit_least_squares,
    fit_projected,
    solve_least_squares,
    solve_matrix_free,
    solve_reduced,
)
from reducedhedge.tensors import reconstruct_hedge

LAMBDA_GRID = [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2]


class TestLeastSquares:
    def test_identity(self):
        rep = solve_least_squares([[1.0]], [1.0])
        assert rep.solution.tolist() == [1.0] and rep.method_tag == "direct"

    def test_ridge_half(self):
        rep = solve_least_squares([[1.0]], [1.0], RegularizationSpec(1.0))
        assert rep.solution[0] == pytest.approx(0.5, abs=1e-15)
        assert rep.method_tag == "regularized"

    def test_prior_consistent(self):
        rep = solve_least_squares([[1.0]], [1.0], RegularizationSpec(1.0, z0=[1.0]))
        assert rep.solution[0] == pytest.approx(1.0, abs=1e-15)

    def test_overdetermined_mean(self):
        rep = solve_least_squares([[1.0], [1.0]], [1.0, 3.0])
        assert rep.solution[0] == pytest.approx(2.0, abs=1e-15)
        assert rep.residual_norm == pytest.approx(np.sqrt(2), abs=1e-15)
        assert rep.method_tag == "least-squares" and rep.rank == 1

    def test_minimum_norm(self):
        rep = solve_least_squares([[1.0, 1.0], [1.0, 1.0]], [2.0, 2.0])
        np.testing.assert_allclose(rep.solution, [1.0, 1.0], atol=1e-15)
        assert rep.rank == 1 and rep.condition_estimate == np.inf

    def test_general_form_against_stacked_oracle(self, rng):
        C = rng.normal(size=(8, 4))
        d = rng.normal(size=8)
        W = np.diag(rng.uniform(0.5, 2, 8))
        L = rng.normal(size=(5, 4))
        z0 = rng.normal(size=4)
        lam = 0.3
        rep = solve_least_squares(C, d, RegularizationSpec(lam, L, z0, W))
        M = np.vstack([W @ C, np.sqrt(lam) * L])
        rhs = np.concatenate([W @ d, np.sqrt(lam) * L @ z0])
        np.testing.assert_allclose(rep.solution, np.linalg.lstsq(M, rhs, rcond=None)[0], atol=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            RegularizationSpec(-1.0)
        with pytest.raises(ValueError):
            RegularizationSpec(1.0, L=[[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(NonFiniteError):
            solve_least_squares([[np.nan]], [1.0])

    def test_ridge_shrinkage(self, rng):
        C = rng.normal(size=(10, 4))
        d = rng.normal(size=10)
        norms = [np.linalg.norm(solve_least_squares(C, d, RegularizationSpec(lam)).solution)
                 for lam in LAMBDA_GRID]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_small_lambda_consistency(self, rng):
        C = rng.normal(size=(10, 4))
        d = rng.normal(size=10)
        z0 = solve_least_squares(C, d).solution
        z = solve_least_squares(C, d, RegularizationSpec(1e-12, z0=rng.normal(size=4))).solution
        np.testing.assert_allclose(z, z0, atol=1e-6)


class TestCondition:
    def test_examples(self):
        assert condition_estimate(np.eye(3)) == 1.0
        assert condition_estimate(np.diag([1.0, 10.0])) == pytest.approx(10.0, rel=1e-15)
        assert condition_estimate([[1.0, 1.0], [1.0, 1.0]]) == np.inf


class TestSolveReduced:
    def test_scalar_instances(self, scalar_instance):
        A, b, X = scalar_instance
        assert solve_reduced(assemble_normal(A, b, X))[0].values[0, 0] == pytest.approx(1.8, abs=1e-15)
        assert solve_reduced(assemble_galerkin(A, b, X))[0].values[0, 0] == pytest.approx(5 / 3, abs=1e-15)

    def test_exact_recovery_instance(self):
        A = np.array([1.0, 2.0]).reshape(2, 1, 1)
        X = np.array([[1.0, 1.0], [1.0, -1.0]])
        xi_star = np.array([[1.0, 0.5]])
        b = np.einsum("lij,lj->li", A, X @ xi_star.T)
        for system in (assemble_normal(A, b, X), assemble_galerkin(A, b, X)):
            xi, rep = solve_reduced(system, basis_id="exact")
            np.testing.assert_allclose(xi.values, xi_star, atol=1e-14)
            assert xi.basis_id == "exact" and rep.method_tag == "direct"

    def test_singular_square_projected(self):
        A = np.ones((3, 1, 2))  # two identical instruments
        b = np.ones((3, 1))
        X = np.ones((3, 1))
        Y = np.column_stack([np.ones(3), [1.0, -1.0, 0.0]])
        s = assemble_projected(A, b, X, Y)
        with pytest.raises(SingularSystemError):
            solve_reduced(s)
        xi, rep = solve_reduced(s, mode="least-squares")
        np.testing.assert_allclose(xi.values, [[0.5], [0.5]], atol=1e-14)
        xi, rep = solve_reduced(s, RegularizationSpec(1e-8))
        assert rep.method_tag == "regularized"

    def test_regularized_normal_matches_design_oracle(self, rng):
        A, b, X = random_problem(rng, N=15, n=2, m=2, r=3)
        D = design_by_loops(A, X) / np.sqrt(15)
        y = b.reshape(-1) / np.sqrt(15)
        for lam in (1e-3, 0.5):
            xi, rep = solve_reduced(assemble_normal(A, b, X), RegularizationSpec(lam))
            ref = np.linalg.lstsq(np.vstack([D, np.sqrt(lam) * np.eye(6)]),
                                  np.concatenate([y, np.zeros(6)]), rcond=None)[0]
            np.testing.assert_allclose(xi.flat(), ref, atol=1e-10)

    def test_regularized_projected_acts_on_flat_residual(self, rng):
        A, b, X = random_problem(rng, N=20, n=2, m=2, r=2)
        s = assemble_galerkin(A, b, X)
        lam = 0.2
        xi, _ = solve_reduced(s, RegularizationSpec(lam))
        ref = np.linalg.solve(s.B_flat.T @ s.B_flat + lam * np.eye(4), s.B_flat.T @ s.beta_flat)
        np.testing.assert_allclose(xi.flat(), ref, atol=1e-12)

    def test_normal_system_rejects_row_weights(self, scalar_instance):
        with pytest.raises(ValueError):
            solve_reduced(assemble_normal(*scalar_instance), RegularizationSpec(0.0, W=[[1.0]]))

    def test_rank_deficient_normal_min_norm(self):
        A = np.ones((4, 1, 2))
        b = np.full((4, 1), 2.0)
        xi, rep = solve_reduced(assemble_normal(A, b, np.ones((4, 1))))
        np.testing.assert_allclose(xi.values, [[1.0], [1.0]], atol=1e-12)
        assert rep.method_tag == "least-squares" and rep.rank == 1


class TestMatrixFree:
    @pytest.mark.parametrize("seed", range(5))
    def test_agrees_with_dense(self, seed):
        g = np.random.default_rng(seed)
        m, r = int(g.integers(1, 6)), int(g.integers(1, 9))
        A, b, X = random_problem(g, N=200, n=3, m=m, r=r)
        dense, _ = solve_reduced(assemble_normal(A, b, X))
        mf, rep = solve_matrix_free(A, b, X)
        np.testing.assert_allclose(mf.values, dense.values, atol=1e-7)
        assert rep.iterations is not None

    def test_regularized_and_weighted(self, rng):
        A, b, X = random_problem(rng, N=100, n=2, m=3, r=4)
        W = rng.uniform(0.5, 2, size=(100, 2, 2))
        reg = RegularizationSpec(0.05, L=np.diag(np.arange(1.0, 13.0)), z0=rng.normal(size=12))
        dense, _ = solve_reduced(assemble_normal(A, b, X, W), reg)
        mf, _ = solve_matrix_free(A, b, X, reg, W)
        np.testing.assert_allclose(mf.values, dense.values, atol=1e-7)

    def test_fit_dispatch(self, rng):
        A, b, X = random_problem(rng, N=80, n=2, m=2, r=3)
        a, ra = fit_least_squares(A, b, X)
        c, rc = fit_least_squares(A, b, X, explicit_max=1)
        assert rc.iterations is not None and ra.iterations is None
        np.testing.assert_allclose(a.values, c.values, atol=1e-7)
        assert a.basis_id == X.basis_id


class TestNonOrthonormal:
    @pytest.mark.parametrize("seed", range(4))
    def test_same_hedge_ratios(self, seed):
        g = np.random.default_rng(seed)
        N = 60
        S = g.lognormal(size=N)
        Z = np.column_stack([np.ones(N), S, S**2])
        A = g.normal(size=(N, 2, 2))
        b = g.normal(size=(N, 2))
        X = orthonormalize(Z)
        for fit in (fit_least_squares, fit_projected):
            raw = reconstruct_hedge(fit(A, b, Z)[0], Z).values
            ortho = reconstruct_hedge(fit(A, b, X)[0], X).values
            np.testing.assert_allclose(raw, ortho, atol=1e-8)
