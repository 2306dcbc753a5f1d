import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reducedhedge.errors import (
    BasisMismatchError,
    CorruptFileError,
    DimensionMismatchError,
    NonFiniteError,
)
from reducedhedge.basis import orthonormalize, path_indicator_basis
from reducedhedge.tensors import (
    FlatIndexMaps,
    HedgeCoefficients,
    PrimitiveSensitivities,
    SensitivityTensor,
    export_tensor_csv,
    flatten_col,
    flatten_row,
    read_tensor,
    reconstruct_hedge,
    unflatten_col,
    unflatten_row,
    validate_problem,
    write_tensor,
)


class TestFlatten:
    @pytest.mark.parametrize("i,s,n,expected", [(1, 1, 3, 1), (2, 3, 4, 10), (3, 1, 3, 3)])
    def test_row(self, i, s, n, expected):
        assert flatten_row(i, s, n) == expected

    @pytest.mark.parametrize("j,q,m,expected", [(1, 1, 2, 1), (1, 2, 2, 3), (2, 2, 3, 5)])
    def test_col(self, j, q, m, expected):
        assert flatten_col(j, q, m) == expected

    @pytest.mark.parametrize("args", [(0, 1, 3), (4, 1, 3), (1, 0, 3)])
    def test_row_out_of_range(self, args):
        with pytest.raises(IndexError):
            flatten_row(*args)

    def test_col_out_of_range(self):
        with pytest.raises(IndexError):
            flatten_col(3, 1, 2)

    @pytest.mark.parametrize("n,p", [(1, 1), (2, 3), (4, 2), (3, 5)])
    def test_bijective(self, n, p):
        rows = [flatten_row(i, s, n) for i, s in itertools.product(range(1, n + 1), range(1, p + 1))]
        assert sorted(rows) == list(range(1, n * p + 1))
        cols = [flatten_col(j, q, n) for j, q in itertools.product(range(1, n + 1), range(1, p + 1))]
        assert sorted(cols) == list(range(1, n * p + 1))
        for k in range(1, n * p + 1):
            assert flatten_row(*unflatten_row(k, n), n) == k
            assert flatten_col(*unflatten_col(k, n), n) == k

    def test_index_maps_bounds(self):
        maps = FlatIndexMaps(n=2, m=3, p=2, r=2)
        assert maps.row(2, 2) == 4 and maps.col(3, 2) == 6
        assert (maps.n_rows, maps.n_cols) == (4, 6)
        with pytest.raises(IndexError):
            maps.row(1, 3)

    def test_flat_coefficients_follow_col_map(self):
        xi = HedgeCoefficients(np.arange(6.0).reshape(2, 3))  # m=2, r=3
        z = xi.flat()
        for j in (1, 2):
            for q in (1, 2, 3):
                assert z[flatten_col(j, q, 2) - 1] == xi.values[j - 1, q - 1]
        back = HedgeCoefficients.from_flat(z, 2, 3)
        np.testing.assert_array_equal(back.values, xi.values)


class TestContainers:
    def test_shapes(self):
        A = SensitivityTensor(np.zeros((5, 2, 3)))
        assert (A.n_paths, A.n_primitives, A.n_instruments) == (5, 2, 3)

    def test_rejects_nan_with_index(self):
        vals = np.zeros((3, 2, 2))
        vals[1, 0, 1] = np.nan
        with pytest.raises(NonFiniteError) as ei:
            SensitivityTensor(vals)
        assert ei.value.index == (1, 0, 1)

    def test_rejects_empty_axis(self):
        with pytest.raises(DimensionMismatchError):
            SensitivityTensor(np.zeros((0, 1, 1)))

    def test_immutable_copy(self):
        raw = np.ones((2, 1))
        b = PrimitiveSensitivities(raw)
        raw[0, 0] = 5.0
        assert b.values[0, 0] == 1.0
        with pytest.raises(ValueError):
            b.values[0, 0] = 2.0


class TestValidate:
    def test_ok(self):
        dims = validate_problem(np.ones((2, 1, 1)), np.ones((2, 1)), np.ones((2, 1)))
        assert dims.n_paths == 2 and dims.n_test is None

    def test_mismatch_on_N(self):
        with pytest.raises(DimensionMismatchError) as ei:
            validate_problem(np.ones((2, 1, 1)), np.ones((3, 1)), np.ones((2, 1)))
        assert ei.value.axis == "N"

    def test_mismatch_on_n(self):
        with pytest.raises(DimensionMismatchError) as ei:
            validate_problem(np.ones((2, 2, 1)), np.ones((2, 1)), np.ones((2, 1)))
        assert ei.value.axis == "n"

    def test_mismatch_on_Y(self):
        with pytest.raises(DimensionMismatchError):
            validate_problem(np.ones((2, 1, 1)), np.ones((2, 1)), np.ones((2, 1)), np.ones((3, 1)))

    def test_nan(self):
        A = np.ones((2, 1, 1))
        A[1, 0, 0] = np.nan
        with pytest.raises(NonFiniteError) as ei:
            validate_problem(A, np.ones((2, 1)), np.ones((2, 1)))
        assert ei.value.name == "A" and ei.value.index == (1, 0, 0)


class TestReconstruct:
    def test_direct_sum(self):
        X = np.array([[1.0, 1.0], [1.0, -1.0]])
        phi = reconstruct_hedge(HedgeCoefficients([[2.0, 1.0]]), X)
        np.testing.assert_array_equal(phi.values[:, 0], [3.0, 1.0])

    def test_zero(self):
        phi = reconstruct_hedge(HedgeCoefficients(np.zeros((2, 3))), np.ones((4, 3)))
        assert np.all(phi.values == 0)

    def test_constant_hedge(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        phi = reconstruct_hedge(HedgeCoefficients([[1.0, 0.0]]), X)
        np.testing.assert_array_equal(phi.values, np.ones((5, 1)))

    def test_basis_mismatch(self):
        b1 = orthonormalize(np.array([[1.0], [2.0]]))
        b2 = orthonormalize(np.array([[1.0], [3.0]]))
        xi = HedgeCoefficients([[1.0]], b1.basis_id)
        reconstruct_hedge(xi, b1)
        with pytest.raises(BasisMismatchError):
            reconstruct_hedge(xi, b2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            reconstruct_hedge(HedgeCoefficients(np.ones((1, 2))), np.ones((3, 3)))

    def test_path_indicator_decoupling(self, rng):
        N, m = 6, 2
        xi = HedgeCoefficients(rng.normal(size=(m, N)))
        phi = reconstruct_hedge(xi, path_indicator_basis(N))
        np.testing.assert_allclose(phi.values, np.sqrt(N) * xi.values.T, rtol=0, atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
    def test_linear_in_coefficients(self, seed, alpha, beta):
        g = np.random.default_rng(seed)
        X = g.normal(size=(7, 3))
        x1, x2 = g.normal(size=(2, 2, 3))
        lhs = reconstruct_hedge(HedgeCoefficients(alpha * x1 + beta * x2), X).values
        rhs = (alpha * reconstruct_hedge(HedgeCoefficients(x1), X).values
               + beta * reconstruct_hedge(HedgeCoefficients(x2), X).values)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


class TestSerialization:
    def test_roundtrip_bitwise(self, tmp_path, rng):
        for arr in (rng.normal(size=(4, 3, 2)), rng.normal(size=(5, 2)), rng.normal(size=7)):
            write_tensor(tmp_path / "t.hrt", arr)
            back = read_tensor(tmp_path / "t.hrt", arr.ndim)
            assert back.shape == arr.shape
            assert back.tobytes() == arr.tobytes()

    def test_header_layout(self, tmp_path):
        write_tensor(tmp_path / "t.hrt", np.arange(6.0).reshape(1, 2, 3))
        raw = (tmp_path / "t.hrt").read_bytes()
        assert raw[:7] == b"HRTENS1"
        assert np.frombuffer(raw[7:31], dtype="<u8").tolist() == [1, 2, 3]
        np.testing.assert_array_equal(np.frombuffer(raw[31:], dtype="<f8"), np.arange(6.0))

    def test_truncated(self, tmp_path):
        write_tensor(tmp_path / "t.hrt", np.ones((3, 2, 2)))
        raw = (tmp_path / "t.hrt").read_bytes()
        (tmp_path / "short.hrt").write_bytes(raw[:-5])
        with pytest.raises(CorruptFileError):
            read_tensor(tmp_path / "short.hrt")
        (tmp_path / "head.hrt").write_bytes(raw[:10])
        with pytest.raises(CorruptFileError):
            read_tensor(tmp_path / "head.hrt")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.hrt").write_bytes(b"NOTTENS" + bytes(24))
        with pytest.raises(CorruptFileError):
            read_tensor(tmp_path / "x.hrt")

    def test_csv_export(self, tmp_path):
        A = np.arange(12.0).reshape(2, 3, 2)
        export_tensor_csv(tmp_path / "A.csv", A)
        lines = (tmp_path / "A.csv").read_text().splitlines()
        assert lines[0] == "path,primitive,instrument_1,instrument_2"
        assert len(lines) == 1 + 2 * 3
        assert lines[4].split(",") == ["2", "1", "6.0", "7.0"]
