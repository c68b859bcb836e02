import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fadingcap import DomainError, UsageError
from fadingcap.rearrange import (
    SampledFunction,
    decreasing_rearrangement,
    distribution_function,
    first_sample_dominates,
    majorizes,
    midpoints,
    recovery_map,
    schur_order_witness,
)

positive = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)
vectors = arrays(float, st.integers(2, 64), elements=positive)


def _spread(rng, x, steps=20):
    """Apply random T-transforms (pairwise averaging); the result is majorized by x."""
    y = x.copy()
    for _ in range(steps):
        i, j = rng.choice(y.size, 2, replace=False)
        lam = rng.uniform()
        yi, yj = y[i], y[j]
        y[i] = lam * yi + (1 - lam) * yj
        y[j] = lam * yj + (1 - lam) * yi
    return y


def test_midpoints():
    np.testing.assert_allclose(midpoints(4), [0.125, 0.375, 0.625, 0.875])


def test_sampled_function_validation():
    with pytest.raises(DomainError):
        SampledFunction([1.0])
    with pytest.raises(DomainError):
        SampledFunction([1.0, -0.5])
    with pytest.raises(DomainError):
        SampledFunction([1.0, np.inf])
    x = SampledFunction.from_callable(lambda f: 2 * f, grid_size=8)
    assert x.grid_size == 8
    assert x.integral() == pytest.approx(1.0)


def test_rearrangement_small_example():
    x = SampledFunction([1.0, 3.0, 2.0, 3.0])
    res = decreasing_rearrangement(x)
    np.testing.assert_array_equal(res.sorted_values, [3.0, 3.0, 2.0, 1.0])
    # ties keep left-to-right order
    np.testing.assert_array_equal(res.permutation, [3, 0, 2, 1])
    np.testing.assert_array_equal(res.recover(), x.values)
    np.testing.assert_allclose(recovery_map(x), [0.75, 0.0, 0.5, 0.25])


def test_distribution_function():
    x = SampledFunction([1.0, 3.0, 2.0, 3.0])
    assert distribution_function(x, 0.5) == 1.0
    assert distribution_function(x, 2.0) == 0.5
    assert distribution_function(x, 3.0) == 0.0


@settings(max_examples=100, deadline=None)
@given(vectors)
def test_rearrangement_is_equimeasurable_and_sorted(v):
    x = SampledFunction(v)
    res = decreasing_rearrangement(x)
    assert np.all(np.diff(res.sorted_values) <= 0)
    np.testing.assert_array_equal(res.recover(), x.values)
    assert sorted(res.permutation.tolist()) == list(range(v.size))
    for s in np.unique(v):
        assert distribution_function(x, s) == distribution_function(SampledFunction(res.sorted_values), s)


def test_majorization_basic_cases():
    flat = SampledFunction(np.ones(4))
    peaked = SampledFunction([4.0, 0.0, 0.0, 0.0])
    assert majorizes(peaked, flat) is True
    assert majorizes(flat, peaked) is False
    assert majorizes(flat, flat) is True
    # same total, prefix sums cross
    a = SampledFunction([3.0, 0.5, 0.5, 0.0])
    b = SampledFunction([2.0, 2.0, 0.0, 0.0])
    assert majorizes(a, b) is None
    # different totals are never comparable
    assert majorizes(SampledFunction([2.0, 2.0]), SampledFunction([1.0, 1.0])) is None


def test_majorization_mismatched_grids():
    with pytest.raises(UsageError):
        majorizes(SampledFunction(np.ones(4)), SampledFunction(np.ones(8)))


def test_majorization_is_permutation_invariant():
    rng = np.random.default_rng(3)
    x = rng.exponential(size=256)
    y = _spread(rng, x, 400)
    assert majorizes(SampledFunction(rng.permutation(x)), SampledFunction(rng.permutation(y)))


@pytest.mark.parametrize("seed", range(25))
def test_concave_means_reverse_majorization(seed):
    # the mean of a concave function can only grow when the samples are spread out
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 300))
    x = rng.gamma(0.5, size=n)
    y = _spread(rng, x, 5 * n)
    xf, yf = SampledFunction(x), SampledFunction(y)
    assert majorizes(xf, yf) is True
    for g in (np.sqrt, np.log1p, lambda t: -t * t, lambda t: np.log1p(10 * t) - t):
        gx, gy = schur_order_witness(xf, yf, g)
        assert gx <= gy + 1e-12 * (1 + abs(gy))


def test_first_sample_dominates():
    x = SampledFunction([0.1, 2.0, 0.3])
    y = SampledFunction([1.0, 1.0, 0.4])
    assert first_sample_dominates(x, y)
    assert not first_sample_dominates(y, x)
    assert not first_sample_dominates(x, y, tol=1.5)
