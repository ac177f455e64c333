import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quantrec.quantize import (
    QuantizationMode,
    QuantizedWeight,
    brute_force_candidates,
    brute_force_project,
    bsign,
    normalized_project,
    project,
    projection_distance,
    ternary_support_size,
)

B = QuantizationMode.BINARY
T = QuantizationMode.TERNARY

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 8).flatmap(lambda n: arrays(float, n, elements=finite)).filter(
    lambda y: np.linalg.norm(y) > 1e-6
)


def test_ternary_example():
    w = project([2, 1, 0.1], T)
    assert w.delta == pytest.approx(1.5)
    assert w.signs == (1, 1, 0)
    np.testing.assert_allclose(w.vector, [1.5, 1.5, 0.0])


def test_binary_example():
    w = project([3, -1], B)
    assert w.delta == 2.0
    np.testing.assert_array_equal(w.vector, [2.0, -2.0])


def test_binary_sign_of_zero_is_positive():
    assert project([0.0, -2.0], B).signs == (1, -1)
    assert list(bsign([0.0, -0.0, 1e-300])) == [1, 1, 1]


def test_normalized_projection_is_unit():
    w = normalized_project([2, 1, 0.1], T)
    assert w.delta == pytest.approx(1 / math.sqrt(2))
    assert np.linalg.norm(w.vector) == pytest.approx(1.0)


def test_ternary_tie_prefers_smaller_support():
    # scores 9, 8, 25/3, 9: exact tie between j = 1 and j = 4
    assert ternary_support_size([3.0, 1.0, 1.0, 1.0]) == 1
    assert project([3.0, -1.0, 1.0, 1.0], T).signs == (1, 0, 0, 0)
    assert project([1.0, 1.0, 1.0], T).support_size == 3
    assert project([1.0, 0.0], T).support_size == 1


def test_zero_vector_rejected():
    with pytest.raises(ValueError):
        project([0.0, 0.0], B)
    with pytest.raises(ValueError):
        project([0.0, 0.0], T)


@pytest.mark.parametrize("bad", [[], [[1.0, 2.0]], [1.0, float("nan")], [float("inf"), 1.0]])
def test_malformed_input_rejected(bad):
    with pytest.raises(ValueError):
        project(bad, T)


def test_quantized_weight_validation():
    with pytest.raises(ValueError):
        QuantizedWeight(-1.0, (1, 1), B)
    with pytest.raises(ValueError):
        QuantizedWeight(1.0, (1, 0), B)
    with pytest.raises(ValueError):
        QuantizedWeight(1.0, (0, 0), T).normalized()
    with pytest.raises(ValueError):
        QuantizedWeight(1.0, (2, 0), T)


def test_mode_parse():
    assert QuantizationMode.parse("binary") is B
    assert QuantizationMode.parse(T) is T
    with pytest.raises(ValueError):
        QuantizationMode.parse("quaternary")


def test_same_state_ignores_scale():
    a = QuantizedWeight(1.0, (1, -1, 0), T)
    b = QuantizedWeight(3.0, (1, -1, 0), T)
    assert a.same_state(b)
    assert a.normalized().same_state(b.normalized())
    assert a != b


@pytest.mark.parametrize("mode", [B, T])
def test_brute_force_agrees_on_random_vectors(mode):
    rng = np.random.default_rng(11)
    for _ in range(500):
        n = int(rng.integers(1, 8))
        y = rng.standard_normal(n)
        fast = project(y, mode)
        assert projection_distance(y, fast) == pytest.approx(
            projection_distance(y, brute_force_project(y, mode)), abs=1e-10
        )
        # the fast answer is one of the optimal candidates
        assert fast.signs in {c.signs for c in brute_force_candidates(y, mode)}


def test_brute_force_dimension_limit():
    with pytest.raises(ValueError):
        brute_force_project(np.ones(13), B)


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(0.01, 100), st.sampled_from([B, T]))
def test_positive_scale_equivariance(y, c, mode):
    a = project(y, mode)
    b = project(c * y, mode)
    assert a.signs == b.signs or math.isclose(
        projection_distance(c * y, b), projection_distance(c * y, QuantizedWeight(c * a.delta, a.signs, mode)),
        rel_tol=1e-9, abs_tol=1e-9,
    )
    if a.signs == b.signs:
        assert b.delta == pytest.approx(c * a.delta, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_ternary_never_farther_than_binary(y):
    db = projection_distance(y, project(y, B))
    dt = projection_distance(y, project(y, T))
    assert dt <= db + 1e-9 * (1 + np.linalg.norm(y))


@settings(max_examples=200, deadline=None)
@given(vectors, st.sampled_from([B, T]))
def test_projection_is_idempotent(y, mode):
    w = project(y, mode)
    again = project(w.vector, mode)
    assert again.signs == w.signs
    assert again.delta == pytest.approx(w.delta, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_ternary_keeps_largest_magnitudes(y):
    w = project(y, T)
    kept = np.abs(y)[list(w.support)]
    dropped = np.delete(np.abs(y), list(w.support))
    if dropped.size:
        assert kept.min() >= dropped.max()
    assert all(s == np.sign(y[i]) for i, s in enumerate(w.signs) if s)


@settings(max_examples=200, deadline=None)
@given(vectors, st.integers(0, 7))
def test_small_coordinate_is_zeroed(y, j):
    # any |y_j| < ||y||_1 / (5n) is dropped by the ternary projection
    n = y.size
    j = j % n
    y = y.copy()
    y[j] = 0.0
    if not np.any(y):
        return
    y[j] = 0.99 * np.sum(np.abs(y)) / (5 * n)
    assert project(y, T).signs[j] == 0
