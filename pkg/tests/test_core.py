import numpy as np
import pytest

from precboot import (Dataset, IndexSet, RngSpec, SymMatrix, center,
                      index_set_all_offdiag, index_set_from_blocks)
from precboot.errors import EmptyBlock, InsufficientData, InvalidDimension


class TestDataset:
    def test_shape_properties(self):
        d = Dataset(np.zeros((5, 3)))
        assert (d.n, d.p) == (5, 3)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientData):
            Dataset(np.zeros((3, 3)))

    def test_too_few_columns(self):
        with pytest.raises(InvalidDimension):
            Dataset(np.zeros((10, 1)))

    def test_not_2d(self):
        with pytest.raises(InvalidDimension):
            Dataset(np.zeros(10))

    def test_centered_flag_is_checked(self):
        with pytest.raises(InvalidDimension):
            Dataset(np.ones((5, 2)), centered=True)


class TestCenter:
    def test_column_means_zero(self, rng):
        d = center(Dataset(rng.standard_normal((50, 4)) + 3.0))
        assert np.abs(d.values.mean(axis=0)).max() < 1e-12
        assert d.centered

    def test_idempotent(self, rng):
        d = center(Dataset(rng.standard_normal((20, 3))))
        assert center(d) is d


class TestIndexSet:
    def test_order_and_positions(self):
        s = IndexSet(np.array([[1, 3], [2, 1], [4, 4]]))
        assert s.r == 3
        assert s.position_of((2, 1)) == 2
        assert list(s.rows()) == [0, 1, 3]
        assert list(s.cols()) == [2, 0, 3]

    def test_position_of_missing(self):
        s = IndexSet(np.array([[1, 2]]))
        with pytest.raises(KeyError):
            s.position_of((2, 1))

    def test_rejects_duplicates(self):
        with pytest.raises(InvalidDimension):
            IndexSet(np.array([[1, 2], [1, 2]]))

    def test_rejects_zero_index(self):
        with pytest.raises(InvalidDimension):
            IndexSet(np.array([[0, 1]]))

    def test_rejects_empty(self):
        with pytest.raises(InvalidDimension):
            IndexSet(np.zeros((0, 2), dtype=np.int64))


class TestOffdiagSet:
    def test_count_and_order(self):
        s = index_set_all_offdiag(3)
        assert s.r == 6
        assert s.pairs[:3].tolist() == [[1, 2], [1, 3], [2, 1]]

    def test_small_p_rejected(self):
        with pytest.raises(InvalidDimension):
            index_set_all_offdiag(1)


class TestBlockSet:
    def test_cross_pairs_row_major(self):
        groups = {"a": [1, 2], "b": [4]}
        s = index_set_from_blocks(groups, ("a", "b"))
        assert s.pairs.tolist() == [[1, 4], [2, 4]]

    def test_within_block_drops_diagonal(self):
        s = index_set_from_blocks({"a": [2, 5]}, ("a", "a"))
        assert s.pairs.tolist() == [[2, 5], [5, 2]]

    def test_empty_group(self):
        with pytest.raises(EmptyBlock):
            index_set_from_blocks({"a": [], "b": [1]}, ("a", "b"))

    def test_singleton_within(self):
        with pytest.raises(EmptyBlock):
            index_set_from_blocks({"a": [3]}, ("a", "a"))


class TestSymMatrix:
    def test_mirrors_lower_triangle(self):
        m = SymMatrix(np.array([[1.0, 99.0], [2.0, 3.0]]))
        assert m[0, 1] == 2.0 and m[1, 0] == 2.0

    def test_exact_symmetry(self, rng):
        m = SymMatrix(rng.standard_normal((7, 7)))
        assert np.array_equal(m.values, m.values.T)

    def test_read_only(self):
        m = SymMatrix(np.eye(2))
        with pytest.raises(ValueError):
            m.values[0, 0] = 5.0

    def test_diagonal(self):
        m = SymMatrix(np.diag([1.0, 2.0]))
        assert m.diagonal().tolist() == [1.0, 2.0]

    def test_rejects_non_square(self):
        with pytest.raises(InvalidDimension):
            SymMatrix(np.zeros((2, 3)))


class TestRngSpec:
    def test_same_key_same_draws(self):
        a = RngSpec(7, "x").generator(1, 2).standard_normal(5)
        b = RngSpec(7, "x").generator(1, 2).standard_normal(5)
        assert np.array_equal(a, b)

    def test_different_stream_different_draws(self):
        a = RngSpec(7, "x").generator(0).standard_normal(5)
        b = RngSpec(7, "y").generator(0).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_different_key_different_draws(self):
        spec = RngSpec(7)
        a = spec.generator(0).standard_normal(5)
        b = spec.generator(1).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_child_is_deterministic(self):
        a = RngSpec(7, "x").child(3).generator(1).standard_normal(4)
        b = RngSpec(7, "x").child(3).generator(1).standard_normal(4)
        assert np.array_equal(a, b)

    def test_child_differs_from_parent(self):
        spec = RngSpec(7, "x")
        a = spec.generator(3, 1).standard_normal(4)
        b = spec.child(3).generator(1).standard_normal(4)
        assert not np.array_equal(a, b)
