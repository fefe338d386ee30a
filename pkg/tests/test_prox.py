import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chislr.errors import DimensionMismatch, InvalidInput
from chislr.linalg import svd_thin
from chislr.prox import (GroupPartition, group_shrink, hierarchical_prox,
                         singular_value_threshold, soft_threshold)

import oracles

pytestmark = pytest.mark.usefixtures("backend")

finite = st.floats(-100, 100, allow_nan=False)
thresholds = st.floats(0, 20, allow_nan=False)


@st.composite
def matrix_and_partition(draw, max_rows=10, max_cols=4):
    rows = draw(st.integers(1, max_rows))
    cols = draw(st.integers(1, max_cols))
    m = draw(arrays(np.float64, (rows, cols), elements=finite))
    labels = draw(st.lists(st.integers(0, rows - 1), min_size=rows, max_size=rows))
    # relabel to 0..K-1 in first-appearance order so every group is non-empty
    remap = {}
    for lab in labels:
        remap.setdefault(lab, len(remap))
    return m, GroupPartition.from_labels([remap[lab] for lab in labels])


# ---------------------------------------------------------------- partition

def test_partition_validation():
    with pytest.raises(InvalidInput):
        GroupPartition(3, [[0, 1], [1, 2]])
    with pytest.raises(InvalidInput):
        GroupPartition(3, [[0, 1]])
    with pytest.raises(InvalidInput):
        GroupPartition(2, [[0, 1], []])
    p = GroupPartition.contiguous([2, 3])
    assert p.k == 2 and p.n == 5
    assert list(p.row_group) == [0, 0, 1, 1, 1]
    assert p == GroupPartition.from_labels([0, 0, 1, 1, 1])
    assert hash(p) == hash(GroupPartition.from_labels([0, 0, 1, 1, 1]))


def test_partition_is_immutable():
    p = GroupPartition.singletons(3)
    with pytest.raises(AttributeError):
        p.n = 4


# ---------------------------------------------------------------- soft threshold

def test_soft_threshold_scalars():
    assert soft_threshold([[5.0]], 2)[0, 0] == 3
    assert soft_threshold([[-1.0]], 2)[0, 0] == 0
    assert soft_threshold([[-5.0]], 2)[0, 0] == -3


def test_soft_threshold_zero_is_identity(rng):
    m = rng.standard_normal((4, 3))
    np.testing.assert_array_equal(soft_threshold(m, 0), m)


def test_soft_threshold_matches_scalar_minimizer(rng):
    m = rng.standard_normal((4, 4))
    expected = oracles.prox_sparse_group(m, [range(4)], 0.3, 0.0)
    np.testing.assert_allclose(soft_threshold(m, 0.3), expected, atol=1e-6)


def test_soft_threshold_negative_threshold():
    with pytest.raises(InvalidInput):
        soft_threshold(np.eye(2), -0.1)


# ---------------------------------------------------------------- group shrink

def test_group_shrink_closed_form():
    m = np.array([[3.0], [4.0]])
    out = group_shrink(m, GroupPartition.contiguous([2]), 2.0)
    np.testing.assert_allclose(out, m * 3 / 5)


def test_group_shrink_kills_small_group():
    m = np.array([[0.3, 0.4], [2.0, 0.0]])
    out = group_shrink(m, GroupPartition.contiguous([1, 1]), 0.5)
    np.testing.assert_array_equal(out[0], [0, 0])
    np.testing.assert_allclose(out[1], [1.5, 0])


def test_group_shrink_zero_group_maps_to_zero():
    m = np.zeros((3, 2))
    np.testing.assert_array_equal(group_shrink(m, GroupPartition.contiguous([3]), 0.0), m)


def test_group_shrink_two_groups_against_oracle(rng):
    m = rng.standard_normal((6, 2))
    p = GroupPartition.contiguous([3, 3])
    expected = oracles.prox_sparse_group(m, p.groups, 0.0, 1.0)
    np.testing.assert_allclose(group_shrink(m, p, 1.0), expected, atol=1e-6)


def test_group_shrink_partition_mismatch():
    with pytest.raises(DimensionMismatch):
        group_shrink(np.ones((3, 2)), GroupPartition.contiguous([2]), 1.0)


# ---------------------------------------------------------------- hierarchical

def test_hierarchical_degenerates_to_soft_threshold(rng):
    m = rng.standard_normal((7, 3))
    p = GroupPartition.contiguous([3, 4])
    np.testing.assert_array_equal(hierarchical_prox(m, p, 0.4, 0.0), soft_threshold(m, 0.4))


def test_hierarchical_degenerates_to_group_shrink(rng):
    m = rng.standard_normal((7, 3))
    p = GroupPartition.contiguous([3, 4])
    np.testing.assert_array_equal(hierarchical_prox(m, p, 0.0, 0.9), group_shrink(m, p, 0.9))


def test_hierarchical_two_dim_grid():
    v = np.array([0.9, 0.4])
    out = hierarchical_prox(v[:, None], GroupPartition.contiguous([2]), 0.5, 0.2)[:, 0]
    np.testing.assert_allclose(out, oracles.grid_prox_2d(v, 0.5, 0.2), atol=1e-3)


def test_hierarchical_against_split_oracle(rng):
    m = rng.standard_normal((9, 3))
    p = GroupPartition.contiguous([2, 4, 3])
    np.testing.assert_allclose(hierarchical_prox(m, p, 0.3, 0.8),
                               oracles.prox_sparse_group_split(m, p.groups, 0.3, 0.8), atol=1e-10)


def test_hierarchical_negative_thresholds():
    p = GroupPartition.contiguous([2])
    with pytest.raises(InvalidInput):
        hierarchical_prox(np.ones((2, 1)), p, -1, 0)
    with pytest.raises(InvalidInput):
        hierarchical_prox(np.ones((2, 1)), p, 0, -1)


# ---------------------------------------------------------------- SVT

def test_svt_diagonal():
    np.testing.assert_allclose(singular_value_threshold(np.diag([3.0, 1.0]), 2.0),
                               np.diag([1.0, 0.0]), atol=1e-12)


def test_svt_zero_threshold_reconstructs(rng):
    m = rng.standard_normal((10, 4))
    np.testing.assert_allclose(singular_value_threshold(m, 0.0), m, atol=1e-9)


def test_svt_shrinks_spectrum(rng):
    m = rng.standard_normal((8, 4))
    out = singular_value_threshold(m, 0.5)
    sig = np.linalg.svd(m, compute_uv=False)
    np.testing.assert_allclose(np.linalg.svd(out, compute_uv=False),
                               np.maximum(sig - 0.5, 0), atol=1e-9)


def test_svt_negative_threshold():
    with pytest.raises(InvalidInput):
        singular_value_threshold(np.eye(2), -1)


def test_svt_rank_drops_past_smallest_singular_value(rng):
    m = rng.standard_normal((12, 4))
    sig = svd_thin(m).sigma
    assert svd_thin(singular_value_threshold(m, sig[-1] * 1.01)).rank == 3
    assert svd_thin(singular_value_threshold(m, sig[-1] * 0.5)).rank == 4


# ---------------------------------------------------------------- properties

@settings(max_examples=80, deadline=None)
@given(matrix_and_partition(), thresholds, thresholds, st.randoms(use_true_random=False))
def test_all_operators_nonexpansive(mp, t1, tg, rnd):
    a, p = mp
    b = a + np.array([[rnd.uniform(-3, 3) for _ in range(a.shape[1])] for _ in range(a.shape[0])])
    gap = np.linalg.norm(a - b)
    tol = 1e-9 * (1 + gap)
    for op in (lambda m: soft_threshold(m, t1), lambda m: group_shrink(m, p, tg),
               lambda m: hierarchical_prox(m, p, t1, tg),
               lambda m: singular_value_threshold(m, t1)):
        assert np.linalg.norm(op(a) - op(b)) <= gap + tol


@settings(max_examples=80, deadline=None)
@given(matrix_and_partition(), thresholds)
def test_sign_symmetry(mp, t):
    m, p = mp
    np.testing.assert_array_equal(soft_threshold(-m, t), -soft_threshold(m, t))
    np.testing.assert_allclose(group_shrink(-m, p, t), -group_shrink(m, p, t), atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(matrix_and_partition(), thresholds, st.floats(0.01, 50))
def test_positive_homogeneity(mp, t, c):
    m, p = mp
    np.testing.assert_allclose(soft_threshold(c * m, c * t), c * soft_threshold(m, t),
                               rtol=1e-9, atol=1e-9 * c)
    np.testing.assert_allclose(group_shrink(c * m, p, c * t), c * group_shrink(m, p, t),
                               rtol=1e-9, atol=1e-9 * c * (1 + np.abs(m).max()))


@settings(max_examples=80, deadline=None)
@given(matrix_and_partition(), thresholds, thresholds)
def test_hierarchical_is_composition(mp, t1, tg):
    m, p = mp
    np.testing.assert_array_equal(hierarchical_prox(m, p, t1, tg),
                                  group_shrink(soft_threshold(m, t1), p, tg))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(1)), elements=finite), thresholds)
def test_hierarchical_singletons_is_double_soft_threshold(m, t):
    # a one-entry group norm is |x|, so the group stage is a second soft threshold
    p = GroupPartition.singletons(m.shape[0])
    np.testing.assert_allclose(hierarchical_prox(m, p, t, 0.5 * t),
                               soft_threshold(soft_threshold(m, t), 0.5 * t), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 5)), elements=finite),
       thresholds)
def test_svt_rank_never_increases(m, t):
    assert svd_thin(singular_value_threshold(m, t)).rank <= svd_thin(m).rank


def test_partition_pickles():
    import pickle
    p = GroupPartition(5, [[3, 0], [1, 2, 4]])
    assert pickle.loads(pickle.dumps(p)) == p
