import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uvesc.errors import DomainError
from uvesc.polytope import (HessianPolytope, SimplexPoint, build_scaled_polytope, evaluate,
                            sample_simplex, sample_uniform)

H0 = np.array([[100.0, 30.0], [30.0, 20.0]])


def test_scaled_polytope_vertices():
    poly = build_scaled_polytope(H0, 0.1)
    np.testing.assert_allclose(poly.vertices[0], [[90, 27], [27, 18]], rtol=1e-14)
    np.testing.assert_allclose(poly.vertices[1], [[110, 33], [33, 22]], rtol=1e-14)


def test_scaled_identity():
    poly = build_scaled_polytope(np.eye(2), 0.5)
    np.testing.assert_array_equal(poly.vertices[0], 0.5 * np.eye(2))
    np.testing.assert_array_equal(poly.vertices[1], 1.5 * np.eye(2))


@pytest.mark.parametrize("H", [[[1, 2], [2, 1]], [[0, 0], [0, 1]]])
def test_indefinite_center_rejected(H):
    with pytest.raises(DomainError):
        build_scaled_polytope(np.array(H, dtype=float), 0.1)


@pytest.mark.parametrize("d", [0.0, 1.0, -0.1, 1.5])
def test_delta_bar_range(d):
    with pytest.raises(DomainError):
        build_scaled_polytope(H0, d)


def test_asymmetry_threshold():
    tiny = H0.copy()
    tiny[0, 1] += 1e-14
    poly = HessianPolytope((tiny,))
    np.testing.assert_array_equal(poly.vertices[0], poly.vertices[0].T)
    big = H0.copy()
    big[0, 1] += 1e-6
    with pytest.raises(DomainError):
        HessianPolytope((big,))


def test_vertex_checks():
    with pytest.raises(DomainError):
        HessianPolytope(())
    with pytest.raises(DomainError):
        HessianPolytope((np.eye(2), np.eye(3)))
    with pytest.raises(DomainError):
        HessianPolytope((np.eye(2), -np.eye(2)))
    pair = HessianPolytope((np.eye(2), -np.eye(2)), allow_indefinite=True)
    assert pair.n_vertices == 2 and pair.dim == 2


def test_vertices_read_only():
    poly = build_scaled_polytope(H0, 0.1)
    with pytest.raises(ValueError):
        poly.vertices[0][0, 0] = 1.0


def test_evaluate_examples():
    poly = build_scaled_polytope(H0, 0.1)
    np.testing.assert_array_equal(evaluate(poly, (1.0, 0.0)), poly.vertices[0])
    np.testing.assert_allclose(evaluate(poly, (0.5, 0.5)), H0, rtol=1e-12, atol=1e-12)
    scal = HessianPolytope((np.eye(2), 2 * np.eye(2)))
    np.testing.assert_allclose(evaluate(scal, (0.3, 0.7)), 1.7 * np.eye(2), rtol=1e-14)


@pytest.mark.parametrize("alpha", [(0.5, 0.6), (-0.1, 1.1), (1.0,), (0.2, 0.3, 0.5)])
def test_evaluate_rejects_bad_weights(alpha):
    with pytest.raises(DomainError):
        evaluate(build_scaled_polytope(H0, 0.1), alpha)


def test_sample_uniform_deterministic():
    poly = build_scaled_polytope(H0, 0.1)
    a1, H1 = sample_uniform(poly, 7)
    a2, H2 = sample_uniform(poly, 7)
    np.testing.assert_array_equal(a1.weights, a2.weights)
    np.testing.assert_array_equal(H1, H2)


@given(st.integers(0, 2**32 - 1))
def test_sample_single_vertex(seed):
    poly = HessianPolytope((H0,))
    alpha, H = sample_uniform(poly, seed)
    assert alpha.weights.tolist() == [1.0]
    np.testing.assert_array_equal(H, H0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_samples_lie_in_simplex(seed, n):
    w = sample_simplex(n, np.random.default_rng(seed)).weights
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_sampling_is_uniform_on_simplex():
    # for N = 3 each marginal is Beta(1, 2): mean 1/3, P(w_1 < 1/2) = 3/4
    rng = np.random.default_rng(0)
    w = np.array([sample_simplex(3, rng).weights for _ in range(20000)])
    np.testing.assert_allclose(w.mean(axis=0), 1 / 3, atol=0.01)
    assert abs(np.mean(w[:, 0] < 0.5) - 0.75) < 0.015


def _random_pd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + 0.1 * np.eye(n)


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4), st.floats(0, 1))
def test_evaluate_affine_and_pd(seed, n, N, c):
    rng = np.random.default_rng(seed)
    poly = HessianPolytope(tuple(_random_pd(rng, n) for _ in range(N)))
    a, b = sample_simplex(N, rng), sample_simplex(N, rng)
    mix = c * a.weights + (1 - c) * b.weights
    mix[np.argmax(mix)] += 1.0 - mix.sum()
    lhs = evaluate(poly, SimplexPoint(mix))
    rhs = c * evaluate(poly, a) + (1 - c) * evaluate(poly, b)
    scale = max(np.abs(v).max() for v in poly.vertices)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * scale)
    assert np.linalg.eigvalsh(evaluate(poly, a))[0] > 0


@given(st.floats(0.01, 0.99), st.integers(0, 1000))
def test_midpoint_recovers_center(d, seed):
    rng = np.random.default_rng(seed)
    H = _random_pd(rng, 3)
    poly = build_scaled_polytope(H, d)
    np.testing.assert_allclose(evaluate(poly, (0.5, 0.5)), H, atol=1e-12 * np.abs(H).max())
