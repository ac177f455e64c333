import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantrec.model import (
    GaussianSampler,
    Teacher,
    angle,
    coarse_grad_constant,
    forward,
    mc_estimate_grad,
    mc_estimate_loss,
    population_coarse_grad,
    population_loss,
    sample_coarse_grad,
    sample_loss,
)


def scalar_outputs(Z, w, v):
    # plain loops, no vectorization: an independent re-evaluation
    out = 0.0
    for i in range(len(v)):
        pre = sum(Z[i][j] * w[j] for j in range(len(w)))
        out += v[i] * (1.0 if pre > 0 else 0.0)
    return out


def scalar_coarse_grad(Z, w, w_star, v):
    r = scalar_outputs(Z, w, v) - scalar_outputs(Z, w_star, v)
    g = [0.0] * len(w)
    for i in range(len(v)):
        pre = sum(Z[i][j] * w[j] for j in range(len(w)))
        if pre > 0:
            for j in range(len(w)):
                g[j] += v[i] * Z[i][j] * r
    return g


def unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x)


@pytest.fixture
def teacher():
    rng = np.random.default_rng(0)
    return Teacher.from_vectors(unit(rng.standard_normal(4)), rng.standard_normal(4))


def test_constant():
    assert coarse_grad_constant(1.0) == pytest.approx(1 / (2 * math.sqrt(2 * math.pi)))
    assert coarse_grad_constant(4.0) == pytest.approx(4 * 0.19947114020071635)


def test_teacher_validation():
    with pytest.raises(ValueError):
        Teacher(np.array([1.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        Teacher(np.array([1.0, 0.0]), 0.0)
    with pytest.raises(ValueError):
        Teacher(np.array([1.0, 0.0]), 2.0, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        Teacher(np.array([1.0, 0.0]), 1.0).require_v()
    t = Teacher.from_vectors([3.0, 4.0], [1.0, 2.0], normalize=True)
    np.testing.assert_allclose(t.w_star, [0.6, 0.8])
    assert t.v_norm_sq == 5.0 and t.m == 2 and t.n == 2


def test_forward_examples():
    n = 3
    assert forward(np.eye(n), np.array([0.1, 2.0, 5.0]), np.ones(n)) == 3.0
    assert forward(np.ones((2, n)), np.zeros(n), np.ones(2)) == 0.0
    Z = np.random.default_rng(1).standard_normal((4, n))
    assert forward(Z, np.ones(n), np.zeros(4)) == 0.0


def test_forward_shape_errors():
    with pytest.raises(ValueError):
        forward(np.ones((2, 3)), np.ones(2), np.ones(2))
    with pytest.raises(ValueError):
        forward(np.ones((2, 3)), np.ones(3), np.ones(3))


def test_sample_loss_examples(teacher):
    Z = np.random.default_rng(2).standard_normal((4, 4))
    assert sample_loss(Z, teacher.w_star, teacher) == 0.0
    t1 = Teacher.from_vectors([1.0, 0.0], [1.0])
    z = np.array([[0.7, -0.3]])
    assert sample_loss(z, -t1.w_star, t1) == 0.5
    assert sample_loss(np.array([[0.0, 1.0]]), -t1.w_star, t1) == 0.0


def test_sample_functions_match_scalar_oracle(teacher):
    rng = np.random.default_rng(3)
    for _ in range(50):
        Z = rng.standard_normal((4, 4))
        w = rng.standard_normal(4)
        r = scalar_outputs(Z, w, teacher.v) - scalar_outputs(Z, teacher.w_star, teacher.v)
        assert sample_loss(Z, w, teacher) == pytest.approx(0.5 * r * r, abs=1e-12)
        np.testing.assert_allclose(
            sample_coarse_grad(Z, w, teacher), scalar_coarse_grad(Z, w, teacher.w_star, teacher.v), atol=1e-12
        )


def test_batched_matches_unbatched(teacher):
    Z = np.random.default_rng(4).standard_normal((7, 4, 4))
    w = np.array([0.3, -1.0, 0.2, 0.5])
    np.testing.assert_allclose(sample_coarse_grad(Z, w, teacher), [sample_coarse_grad(z, w, teacher) for z in Z])
    np.testing.assert_allclose(sample_loss(Z, w, teacher), [sample_loss(z, w, teacher) for z in Z])


def test_coarse_grad_zero_cases(teacher):
    Z = np.random.default_rng(5).standard_normal((4, 4))
    assert not np.any(sample_coarse_grad(Z, teacher.w_star, teacher))
    w = np.array([1.0, 0.0, 0.0, 0.0])
    Zneg = -np.abs(Z)
    assert not np.any(sample_coarse_grad(Zneg, w, teacher))


def test_population_loss_examples(teacher):
    w = teacher.w_star
    perp = np.array([-w[1], w[0], 0.0, 0.0])
    assert population_loss(w, teacher) == pytest.approx(0.0, abs=1e-7)
    assert population_loss(perp, teacher) == pytest.approx(teacher.v_norm_sq / 4)
    assert population_loss(-w, teacher) == pytest.approx(teacher.v_norm_sq / 2)
    assert population_loss(5 * w, teacher) == pytest.approx(0.0, abs=1e-7)


def test_population_coarse_grad_examples(teacher):
    np.testing.assert_allclose(population_coarse_grad(teacher.w_star, teacher), 0.0, atol=1e-15)
    with pytest.raises(ValueError):
        population_coarse_grad(np.zeros(4), teacher)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=4).filter(lambda x: np.linalg.norm(x) > 1e-3))
def test_descent_direction_correlates_with_teacher(w):
    t = Teacher(unit([0.3, -0.2, 0.9, 0.1]), 2.5)
    g = population_coarse_grad(w, t)
    cos = math.cos(angle(w, t.w_star))
    assert float(-g @ t.w_star) == pytest.approx(t.constant * (1 - cos), abs=1e-12)
    assert float(-g @ t.w_star) >= -1e-15


def test_sampler_is_deterministic():
    a = GaussianSampler(7).draw(3, 2, 2)
    b = GaussianSampler(7).draw(3, 2, 2)
    c = GaussianSampler(7, shard=1).draw(3, 2, 2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_array_equal(GaussianSampler(7).spawn(1).draw(3, 2, 2), c)


def test_mc_matches_closed_form(teacher):
    w = np.array([0.5, -0.2, 0.8, 0.1])
    g_mean, g_se = mc_estimate_grad(w, teacher, GaussianSampler(11), 1_000_000)
    z = (population_coarse_grad(w, teacher) - g_mean) / g_se
    assert np.all(np.abs(z) <= 4)
    l_mean, l_se = mc_estimate_loss(w, teacher, GaussianSampler(12), 1_000_000)
    assert abs(population_loss(w, teacher) - l_mean) <= 4 * l_se


def test_mc_detects_wrong_constant(teacher):
    # an off-by-sqrt(2) constant must be far outside the bands
    w = np.array([0.5, -0.2, 0.8, 0.1])
    g_mean, g_se = mc_estimate_grad(w, teacher, GaussianSampler(11), 200_000)
    wrong = population_coarse_grad(w, teacher, constant=teacher.constant * math.sqrt(2))
    assert np.max(np.abs((wrong - g_mean) / g_se)) > 4


def test_standard_error_shrinks_like_sqrt_count(teacher):
    w = np.array([0.5, -0.2, 0.8, 0.1])
    _, se1 = mc_estimate_grad(w, teacher, GaussianSampler(21), 100_000)
    _, se2 = mc_estimate_grad(w, teacher, GaussianSampler(22), 200_000)
    np.testing.assert_allclose(se1 / se2, math.sqrt(2), rtol=0.05)


def test_mc_shards_do_not_depend_on_count_split(teacher):
    # the first shard's draws are the same whatever the total count
    w = np.array([0.5, -0.2, 0.8, 0.1])
    m_small, _ = mc_estimate_loss(w, teacher, GaussianSampler(3), 100_000)
    Z = GaussianSampler(3).draw(100_000, 4, 4)
    assert m_small == pytest.approx(float(np.mean(sample_loss(Z, w, teacher))), rel=1e-12)


def test_mc_count_validation(teacher):
    with pytest.raises(ValueError):
        mc_estimate_loss(np.ones(4), teacher, GaussianSampler(0), 0)
