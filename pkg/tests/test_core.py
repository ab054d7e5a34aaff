import numpy as np
import pytest

from tenfill import (CpModel, DenseTensor, DomainError, ModelError, ShapeError,
                     cp_evaluate_entry, cp_reconstruct, frobenius_norm,
                     generalized_inner_product, inner_product, relative_error)


def rand_tensor(dims, seed):
    return DenseTensor(np.random.default_rng(seed).standard_normal(dims))


class TestDenseTensor:
    def test_dims_and_flat_layout(self):
        t = DenseTensor.from_flat((2, 3), [1, 2, 3, 4, 5, 6])
        assert t.dims == (2, 3)
        assert t.values[1, 0] == 4.0  # row-major, last index fastest
        assert list(t.data) == [1, 2, 3, 4, 5, 6]

    def test_flat_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            DenseTensor.from_flat((2, 3), [1, 2, 3])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            DenseTensor([[1.0, np.nan]])
        with pytest.raises(ValueError, match="finite"):
            DenseTensor([np.inf])

    def test_masked_mode_uses_separate_array(self):
        t = DenseTensor([[1.0, 2.0]], missing=[[False, True]])
        assert t.missing[0, 1]
        assert np.isfinite(t.values).all()
        with pytest.raises(ValueError, match="finite"):
            DenseTensor([[np.nan, 2.0]], missing=[[True, False]])

    def test_masked_shape_mismatch(self):
        with pytest.raises(ShapeError):
            DenseTensor([[1.0, 2.0]], missing=[True, False, True])

    def test_immutable(self):
        t = DenseTensor([1.0, 2.0])
        with pytest.raises(AttributeError):
            t.values = np.zeros(2)
        with pytest.raises(ValueError):
            t.values[0] = 5.0


class TestInnerProduct:
    def test_all_ones_2x2x2(self):
        t = DenseTensor(np.ones((2, 2, 2)))
        assert inner_product(t, t) == 8.0

    def test_zeros(self):
        z = DenseTensor(np.zeros((3, 3)))
        assert inner_product(z, z) == 0.0

    def test_hand_example(self):
        x = DenseTensor([[1.0, 2.0], [3.0, 4.0]])
        y = DenseTensor([[5.0, 6.0], [7.0, 8.0]])
        assert inner_product(x, y) == 70.0  # 5 + 12 + 21 + 32

    def test_symmetry_exact(self):
        for seed in range(20):
            x = rand_tensor((4, 3, 2), 2 * seed)
            y = rand_tensor((4, 3, 2), 2 * seed + 1)
            assert inner_product(x, y) == inner_product(y, x)

    def test_shape_error_names_both(self):
        with pytest.raises(ShapeError, match=r"\(2, 2\).*\(3, 3\)"):
            inner_product(DenseTensor(np.ones((2, 2))), DenseTensor(np.ones((3, 3))))


class TestGeneralizedInnerProduct:
    def test_three_ones(self):
        t = DenseTensor(np.ones((2, 2)))
        assert generalized_inner_product([t, t, t]) == 4.0

    def test_three_vectors(self):
        a = DenseTensor([1.0, 2.0])
        b = DenseTensor([3.0, 4.0])
        c = DenseTensor([5.0, 6.0])
        assert generalized_inner_product([a, b, c]) == 63.0  # 15 + 48

    def test_pairs_match_inner_product(self):
        x = rand_tensor((3, 3), 10)
        y = rand_tensor((3, 3), 11)
        g = generalized_inner_product([x, y])
        i = inner_product(x, y)
        assert abs(g - i) <= 1e-12 * max(abs(i), 1.0)

    def test_empty_list(self):
        with pytest.raises(ValueError):
            generalized_inner_product([])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            generalized_inner_product([rand_tensor((2, 2), 0), rand_tensor((2, 3), 1)])


class TestFrobeniusNorm:
    def test_ones(self):
        assert frobenius_norm(DenseTensor(np.ones((2, 2)))) == 2.0

    def test_zeros(self):
        assert frobenius_norm(DenseTensor(np.zeros((5, 2, 3)))) == 0.0

    def test_pythagorean(self):
        assert frobenius_norm(DenseTensor([3.0, 4.0])) == 5.0


class TestCpModel:
    def test_rank_and_dims(self):
        m = CpModel([np.ones((4, 2)), np.ones((5, 2)), np.ones((6, 2))])
        assert m.rank == 2
        assert m.dims == (4, 5, 6)

    def test_rank_zero_is_zero_tensor(self):
        m = CpModel([np.zeros((3, 0)), np.zeros((2, 0))])
        assert m.rank == 0
        assert np.array_equal(cp_reconstruct(m).values, np.zeros((3, 2)))
        assert cp_evaluate_entry(m, (1, 1)) == 0.0

    def test_rank_mismatch(self):
        with pytest.raises(ModelError):
            CpModel([np.ones((4, 2)), np.ones((5, 3))])


class TestCpEvaluateEntry:
    def test_rank1_products(self):
        m = CpModel([np.array([[1.0], [2.0]]),
                     np.array([[3.0], [4.0]]),
                     np.array([[1.0], [1.0]])])
        assert cp_evaluate_entry(m, (1, 1, 1)) == 3.0
        assert cp_evaluate_entry(m, (2, 2, 1)) == 8.0

    def test_matches_reconstruct_bitwise(self):
        rng = np.random.default_rng(42)
        m = CpModel([rng.standard_normal((3, 2)), rng.standard_normal((4, 2))])
        dense = cp_reconstruct(m)
        for i in range(1, 4):
            for j in range(1, 5):
                assert cp_evaluate_entry(m, (i, j)) == dense.values[i - 1, j - 1]

    def test_out_of_bounds(self):
        m = CpModel([np.ones((2, 1)), np.ones((2, 1))])
        with pytest.raises(IndexError):
            cp_evaluate_entry(m, (3, 1))
        with pytest.raises(IndexError):
            cp_evaluate_entry(m, (0, 1))
        with pytest.raises(ValueError):
            cp_evaluate_entry(m, (1, 1, 1))


class TestCpReconstruct:
    def test_rank1_outer_product(self):
        m = CpModel([np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]])])
        assert cp_reconstruct(m).values.tolist() == [[3.0, 4.0], [6.0, 8.0]]

    def test_entrywise_oracle_4x5x6(self):
        rng = np.random.default_rng(7)
        m = CpModel([rng.standard_normal((4, 3)),
                     rng.standard_normal((5, 3)),
                     rng.standard_normal((6, 3))])
        dense = cp_reconstruct(m)
        for i in range(1, 5):
            for j in range(1, 6):
                for k in range(1, 7):
                    assert dense.values[i - 1, j - 1, k - 1] == \
                        cp_evaluate_entry(m, (i, j, k))

    def test_scaling_indeterminacy(self):
        rng = np.random.default_rng(3)
        factors = [rng.standard_normal((4, 3)), rng.standard_normal((5, 3)),
                   rng.standard_normal((6, 3))]
        base = frobenius_norm(cp_reconstruct(CpModel(factors)))
        for s in (2.0, -0.125, 1e3):
            scaled = [f.copy() for f in factors]
            scaled[0][:, 1] *= s
            scaled[1][:, 1] /= s
            norm = frobenius_norm(cp_reconstruct(CpModel(scaled)))
            assert abs(norm - base) <= 1e-10 * base


class TestRelativeError:
    def test_exact_match(self):
        t = rand_tensor((3, 3), 0)
        assert relative_error(t, t) == 0.0

    def test_double(self):
        t = rand_tensor((4, 2), 1)
        doubled = DenseTensor(2.0 * t.values)
        assert abs(relative_error(doubled, t) - 1.0) <= 1e-15

    def test_hand_value(self):
        truth = DenseTensor([[3.0, 4.0], [0.0, 0.0]])  # norm 5
        pred = DenseTensor([[3.0, 4.0], [0.0, 3.0]])   # single error entry 3
        assert relative_error(pred, truth) == 0.6

    def test_zero_norm_truth(self):
        with pytest.raises(DomainError):
            relative_error(rand_tensor((2, 2), 2), DenseTensor(np.zeros((2, 2))))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            relative_error(rand_tensor((2, 2), 3), rand_tensor((2, 3), 4))

    def test_nonnegative(self):
        for seed in range(10):
            p = rand_tensor((3, 2), seed)
            t = rand_tensor((3, 2), seed + 100)
            assert relative_error(p, t) >= 0.0
