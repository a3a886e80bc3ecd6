import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from parstab.core import (
    Partition,
    PartitionedState,
    StochasticControlSystem,
    check_dimensions,
    closed_loop_rhs,
    y_norm,
    zero_feedback,
)
from parstab.errors import NumericalBlowup

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_partition_metadata():
    part = Partition(4, (0, 2), 1.5)
    assert (part.m, part.p) == (2, 2)
    assert part.z_indices == (1, 3)
    x = np.array([3.0, 7.0, 4.0, -1.0])
    np.testing.assert_array_equal(part.y(x), [3.0, 4.0])
    np.testing.assert_array_equal(part.z(x), [7.0, -1.0])
    assert part.y_norm(x) == 5.0
    assert not part.inside(x)


@pytest.mark.parametrize(
    "n, idx, H",
    [(3, (), 1.0), (3, (0, 0), 1.0), (3, (3,), 1.0), (3, (-1,), 1.0), (3, (0,), 0.0), (3, (0,), -2.0)],
)
def test_partition_rejects_bad_input(n, idx, H):
    with pytest.raises(ValueError):
        Partition(n, idx, H)


def test_full_partition_allowed():
    part = Partition(2, (0, 1), 1.0)
    assert part.p == 0 and part.z_indices == ()


def test_partitioned_state_is_read_only():
    part = Partition(3, (1,), 2.0)
    s = PartitionedState([5.0, -1.0, 9.0], part)
    assert s.y_norm == 1.0 and s.inside_domain
    with pytest.raises(ValueError):
        s.x[0] = 1.0
    with pytest.raises(ValueError):
        PartitionedState([1.0, 2.0], part)


def test_y_norm_requires_partition_for_arrays():
    with pytest.raises(TypeError):
        y_norm(np.zeros(3))
    part = Partition(3, (0, 1), 1.0)
    assert y_norm(np.array([0.6, 0.8, 100.0]), part) == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 5, elements=finite), arrays(np.float64, 2, elements=finite))
def test_y_norm_ignores_z(x, z_new):
    part = Partition(5, (0, 2, 4), 1.0)
    x2 = x.copy()
    x2[[1, 3]] = z_new
    assert y_norm(x, part) == y_norm(x2, part)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 4, elements=finite), st.permutations([0, 1]), st.sampled_from([-1.0, 1.0]))
def test_y_norm_invariant_under_y_permutation_and_sign(x, perm, sign):
    part = Partition(4, (0, 2), 1.0)
    x2 = x.copy()
    x2[[0, 2]] = sign * x[[0, 2]][list(perm)]
    assert y_norm(x2, part) == pytest.approx(y_norm(x, part), rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (7, 4), elements=finite))
def test_y_norm_batches_rowwise(xs):
    part = Partition(4, (1, 3), 1.0)
    batch = y_norm(xs, part)
    np.testing.assert_array_equal(batch, [y_norm(row, part) for row in xs])


def _toy(leaky_drift=False):
    def drift(x):
        return np.stack([x[..., 1], -x[..., 0]], axis=-1)

    def input(x):
        g = np.zeros(x.shape[:-1] + (2, 1))
        g[..., 1, 0] = 1.0
        return g

    def diffusion(x, u):
        s = np.zeros(x.shape[:-1] + (2, 1))
        s[..., 1, 0] = 0.1 * x[..., 0]
        return s

    return StochasticControlSystem(2, 1, 1, drift, input, diffusion, Partition(2, (0,), 10.0))


def test_closed_loop_rhs_matches_hand_evaluation():
    sys_ = _toy()
    x = np.array([2.0, 3.0])
    drift, diff = closed_loop_rhs(sys_, lambda x: np.array([0.5]), x)
    np.testing.assert_array_equal(drift, [3.0, -1.5])
    np.testing.assert_array_equal(diff, [[0.0], [0.2]])


def test_closed_loop_rhs_accepts_feedback_objects():
    class Out:
        u = np.array([1.0])

    drift, _ = closed_loop_rhs(_toy(), lambda x: Out(), np.array([0.0, 0.0]))
    np.testing.assert_array_equal(drift, [0.0, 1.0])


def test_closed_loop_rhs_names_bad_coordinate():
    sys_ = _toy()
    with pytest.raises(NumericalBlowup) as err:
        closed_loop_rhs(sys_, zero_feedback(sys_), np.array([0.0, np.inf]))
    assert err.value.coordinate == (1,)
    with pytest.raises(NumericalBlowup) as err:
        closed_loop_rhs(sys_, lambda x: np.array([np.nan]), np.array([0.0, 1.0]))
    # a NaN control reaches every row through 0 * nan in g u
    assert err.value.coordinate is not None


def test_check_dimensions_flags_wrong_shapes():
    sys_ = _toy()
    check_dimensions(sys_, [0.0, 1.0])
    bad = StochasticControlSystem(
        2, 1, 1, sys_.drift, lambda x: np.zeros(x.shape[:-1] + (2, 2)), sys_.diffusion, sys_.partition
    )
    with pytest.raises(ValueError, match="input"):
        check_dimensions(bad, [0.0, 1.0])


def test_system_partition_must_match():
    sys_ = _toy()
    with pytest.raises(ValueError):
        StochasticControlSystem(3, 1, 1, sys_.drift, sys_.input, sys_.diffusion, sys_.partition)
