import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from uvesc import experiments as ex
from uvesc.errors import DomainError, Infeasible
from uvesc.polytope import HessianPolytope, build_scaled_polytope
from uvesc.synthesis import SynthesisProblem, SynthesisResult, solve
from uvesc.verifier import (_check, check_certificate, check_descent_condition,
                            check_finite_time_decrease, descent_matrix, lyapunov_rate)


def with_gain(result, K):
    """Same certificate carrying a different gain."""
    X = np.array(result.X)
    return SynthesisResult.from_decision(X, result.Mdec, np.asarray(K) @ X, result.mu)


def test_synthesized_result_passes(example_result, example_poly):
    rep = check_certificate(example_result, example_poly, ex.MU, varphi=ex.VARPHI)
    assert rep.passed
    assert [c.label for c in rep.checks] == ["X > 0", "M > 0", "vertex 1", "vertex 2",
                                            "phi coupling", "rho coupling"]
    assert all(c.margin >= 0 for c in rep.checks)
    assert rep.to_dict()["passed"] is True


def test_perturbed_gain_fails(example_result, example_poly):
    bad = with_gain(example_result, example_result.K + 10 * np.eye(2))
    rep = check_certificate(bad, example_poly, ex.MU)
    assert not rep.passed
    assert max(rep[f"vertex {i}"].eig_max for i in (1, 2)) > 0
    assert rep.worst.label.startswith("vertex")


def test_negative_X_fails(example_poly):
    res = SynthesisResult.from_decision(-np.eye(2), np.eye(2), np.eye(2), ex.MU)
    rep = check_certificate(res, example_poly, ex.MU)
    assert not rep["X > 0"].passed
    with pytest.raises(KeyError):
        rep["missing"]


def test_shape_and_symmetry_guards(example_result, example_poly):
    three = HessianPolytope((np.eye(3),))
    with pytest.raises(DomainError):
        check_certificate(example_result, three, ex.MU)
    with pytest.raises(DomainError):
        _check("asym", np.array([[0.0, 1.0], [0.0, 0.0]]), "nd")


def test_descent_examples():
    one = HessianPolytope((np.eye(2),))
    D = descent_matrix(np.eye(2), -np.eye(2), np.eye(2), 0.5 * np.eye(2), 4.0)
    np.testing.assert_allclose(D, -0.25 * np.eye(2), atol=1e-15)
    assert check_descent_condition(-np.eye(2), np.eye(2), 0.5 * np.eye(2), 4.0, one).passed
    assert not check_descent_condition(np.zeros((2, 2)), np.eye(2), 0.5 * np.eye(2), 4.0, one).passed


def test_reference_gain_is_scaled_inverse():
    prod = ex.H0 @ ex.REFERENCE_GAIN
    assert abs(prod[0, 1]) <= 0.005 and abs(prod[1, 0]) <= 0.005
    np.testing.assert_allclose(np.diag(prod), -13.163, atol=0.005)
    assert ex.reference_gain_residual() <= 0.02


def test_certificate_implies_descent(example_result, example_poly):
    r = example_result
    rep = check_descent_condition(r.K, r.P, r.Qmat, ex.MU, example_poly, samples=50)
    assert len(rep.checks) == 52
    assert rep.passed  # includes the interior samples


pd2 = st.tuples(st.floats(1.0, 50.0), st.floats(1.0, 50.0), st.floats(-0.9, 0.9))


@settings(max_examples=12)
@given(pd2, st.floats(0.02, 0.4), st.floats(1.0, 60.0))
def test_schur_implication_on_random_problems(p, d, mu):
    a, b, c = p
    off = c * np.sqrt(a * b)
    H0 = np.array([[a, off], [off, b]])
    poly = build_scaled_polytope(H0, d)
    try:
        r = solve(SynthesisProblem(poly, mu, objective="feasibility"))
    except Infeasible:
        assume(False)
    # the block margin maps to the descent matrix through P = X^{-1}, so the
    # admissible slack grows with the conditioning of X
    tol = 1e-7 * np.linalg.cond(r.X) ** 2 * np.abs(r.P).max() ** 2 * max(mu, 1.0)
    rep = check_descent_condition(r.K, r.P, r.Qmat, mu, poly, samples=50)
    assert all(ch.eig_max <= tol for ch in rep.checks)


def fd_rate(g, H, K, P, h=1e-6):
    V = lambda v: v @ P @ v / np.linalg.norm(v)
    f = H @ K @ g / np.linalg.norm(g)
    return (V(g + h * f) - V(g - h * f)) / (2 * h)


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_lyapunov_rate_matches_finite_difference(seed, scale):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((2, 3, 3))
    P = A @ A.T + np.eye(3)
    H = B @ B.T + np.eye(3)
    K = rng.standard_normal((3, 3))
    g = scale * rng.standard_normal(3)
    exact = float(lyapunov_rate(g, H, K, P)[0])
    assert exact == pytest.approx(float(lyapunov_rate(g / scale, H, K, P)[0]), rel=1e-12)
    assert exact == pytest.approx(fd_rate(g, H, K, P), rel=1e-5, abs=1e-7 * np.abs(P).max())


def test_radial_rate():
    g = np.array([[3.0, 4.0], [0.0, 2.0]])
    np.testing.assert_allclose(lyapunov_rate(g, np.eye(2), -np.eye(2), np.eye(2)), [-1.0, -1.0])


def test_decrease_example_gain(example_result, example_poly):
    r = example_result
    rep = check_finite_time_decrease(r.K, r.P, example_poly, samples=1000, Qmat=r.Qmat)
    assert rep.passed and rep.min_margin > 0
    assert rep.lambda_min_Q > 0
    again = check_finite_time_decrease(r.K, r.P, example_poly, samples=1000, Qmat=r.Qmat)
    assert again.to_dict() == rep.to_dict()


def test_decrease_wrong_sign(example_result, example_poly):
    rep = check_finite_time_decrease(np.eye(2), example_result.P, example_poly, samples=200)
    assert rep.min_margin < 0 and not rep.passed
    with pytest.raises(DomainError):
        check_finite_time_decrease(np.eye(2), example_result.P, example_poly, samples=99)


def test_decrease_bound_by_q(example_result, example_poly):
    # on the unit sphere the rate is at most -g^T Q g <= -lambda_min(Q)
    r = example_result
    rep = check_finite_time_decrease(r.K, r.P, example_poly, samples=500, Qmat=r.Qmat)
    assert rep.min_margin >= rep.lambda_min_Q * (1 - 1e-6)


@given(st.floats(-20, 5), st.floats(-1, 3), st.floats(-1, 2), st.floats(0.5, 50))
def test_scalar_oracle(ell, m, x, mu):
    a, b = 2 * ell + 0.25 * mu + m, ell
    det = -mu * a - b * b
    assume(abs(x) > 1e-3 and abs(m) > 1e-3 and abs(a) > 1e-3 and abs(det) > 1e-3)
    truth = x > 0 and m > 0 and ex.scalar_block_is_nd(1.0, ell, m, mu)
    res = SynthesisResult.from_decision([[x]], [[m]], [[ell]], mu)
    assert check_certificate(res, HessianPolytope((np.eye(1),)), mu).passed == truth
