import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvesc.dither import (DitherConfig, common_period, delta_matrix, demodulation, perturbation,
                          signal_average, validate_frequencies)
from uvesc.errors import DomainError, NumericalError

TWO_TONE = DitherConfig([0.1, 0.1], (1, 7), 10.0)


def brute_force_valid(m):
    """Independent enumeration of the exclusion set, channel by channel."""
    n = len(m)
    for i in range(n):
        banned = set()
        for j in range(n):
            if j != i:
                banned.add(2 * m[j])  # doubled to stay in integers
        for j in range(n):
            for k in range(j + 1, n):
                banned.add(m[j] + m[k])
        for k in range(n):
            for l in range(n):
                if k == l == i:
                    continue
                banned.add(2 * (m[k] + m[l]))
                banned.add(2 * (m[k] - m[l]))
        if 2 * m[i] in banned:
            return False
    return True


def test_validate_examples():
    assert validate_frequencies((1, 7)).valid
    bad = validate_frequencies((1, 2))
    assert not bad.valid
    kinds = {(v.channel, v.kind) for v in bad.violations}
    assert (0, "difference") in kinds and (1, "sum") in kinds
    assert validate_frequencies((5,)).valid


@given(st.lists(st.integers(1, 30), min_size=1, max_size=4))
def test_validate_matches_enumeration(m):
    assert validate_frequencies(m).valid == brute_force_valid(m)


@given(st.lists(st.integers(1, 30), min_size=1, max_size=4), st.randoms())
def test_validate_permutation_symmetric(m, r):
    p = list(m)
    r.shuffle(p)
    assert validate_frequencies(m).valid == validate_frequencies(p).valid


@pytest.mark.parametrize("kwargs", [
    dict(amplitudes=[0.1, 0.1], multipliers=(1, 2), base_frequency=10),
    dict(amplitudes=[0.1, -0.1], multipliers=(1, 7), base_frequency=10),
    dict(amplitudes=[0.1], multipliers=(1, 7), base_frequency=10),
    dict(amplitudes=[0.1, 0.1], multipliers=(1, 7), base_frequency=0),
    dict(amplitudes=[0.1, 0.1], multipliers=(1.5, 7), base_frequency=10),
    dict(amplitudes=[0.1, 0.1], multipliers=(0, 7), base_frequency=10),
])
def test_dither_config_rejects(kwargs):
    with pytest.raises(DomainError):
        DitherConfig(**kwargs)


def test_signal_examples():
    np.testing.assert_array_equal(perturbation(0.0, TWO_TONE), [0, 0])
    np.testing.assert_array_equal(demodulation(0.0, TWO_TONE), [0, 0])
    # M S^T vanishes at t = 0, so the oscillating part is -I there
    np.testing.assert_array_equal(delta_matrix(0.0, TWO_TONE), -np.eye(2))
    one = DitherConfig([0.1], (1,), 10.0)
    np.testing.assert_allclose(perturbation(math.pi / 20, one), [0.1], rtol=1e-15)
    np.testing.assert_allclose(demodulation(math.pi / 20, one), [20.0], rtol=1e-15)


def test_signals_vectorize():
    ts = np.linspace(0, 1, 7)
    S = perturbation(ts, TWO_TONE)
    assert S.shape == (7, 2)
    np.testing.assert_allclose(S[3], perturbation(ts[3], TWO_TONE))


def test_common_period_examples():
    assert common_period(TWO_TONE)[0] == pytest.approx(2 * math.pi / 10, abs=1e-15)
    assert common_period(DitherConfig([1, 1], (2, 5), 1.0))[0] == pytest.approx(2 * math.pi)
    cfg = DitherConfig([1.0], (2,), 1.0)
    assert common_period(cfg)[0] == pytest.approx(math.pi)
    assert common_period(DitherConfig([1.0], (1,), 3.0))[0] == pytest.approx(2 * math.pi / 3)


def test_average_examples():
    T, _ = common_period(TWO_TONE)
    H = np.array([[100.0, 30.0], [30.0, 20.0]])
    assert np.abs(signal_average(lambda t: perturbation(t, TWO_TONE), T)).max() <= 1e-8
    assert np.abs(signal_average(lambda t: delta_matrix(t, TWO_TONE), T)).max() <= 1e-8
    omega = signal_average(lambda t: (np.eye(2) + delta_matrix(t, TWO_TONE)) @ H, T)
    np.testing.assert_allclose(omega, H, atol=1e-8)


def test_average_guards():
    with pytest.raises(DomainError):
        signal_average(np.sin, 1.0, quadrature_points=32)
    with pytest.raises(NumericalError):
        signal_average(lambda t: np.array([np.nan]), 1.0)


mults = st.sampled_from([(1,), (3,), (1, 7), (2, 5), (1, 4, 10), (3, 8, 20)])


@st.composite
def dithers(draw):
    m = draw(mults)
    a = draw(st.lists(st.floats(0.01, 2.0), min_size=len(m), max_size=len(m)))
    w = draw(st.floats(0.5, 50.0))
    return DitherConfig(a, m, w)


@given(dithers(), st.floats(0, 100))
def test_outer_product_identity(cfg, t):
    lhs = np.outer(demodulation(t, cfg), perturbation(t, cfg))
    assert np.linalg.norm(lhs - np.eye(cfg.n) - delta_matrix(t, cfg)) <= 1e-10 * max(
        1.0, np.abs(cfg.amplitudes).max() / np.abs(cfg.amplitudes).min())


@given(dithers(), st.floats(0, 100))
def test_componentwise_product(cfg, t):
    prod = demodulation(t, cfg) * perturbation(t, cfg)
    np.testing.assert_allclose(prod, 2 * np.sin(cfg.frequencies * t) ** 2, atol=1e-12)


@given(dithers(), st.floats(0, 100))
def test_periodicity(cfg, t):
    T, _ = common_period(cfg)
    for f in (perturbation, demodulation, delta_matrix):
        scale = max(1.0, float(np.abs(f(t, cfg)).max()))
        assert np.abs(f(t + T, cfg) - f(t, cfg)).max() <= 1e-10 * scale * max(1.0, t * cfg.frequencies.max() / 100)


@given(dithers(), st.floats(0, 100))
def test_delta_diagonal_range(cfg, t):
    # the oscillating diagonal is -cos(2 w_i t), so it lives in [-1, 1]
    d = np.diag(delta_matrix(t, cfg))
    assert np.all(d >= -1 - 1e-15) and np.all(d <= 1 + 1e-15)


@settings(max_examples=15)
@given(dithers())
def test_zero_averages(cfg):
    T, _ = common_period(cfg)
    for f in (perturbation, demodulation, delta_matrix):
        avg = signal_average(lambda t: f(t, cfg), T)
        scale = max(1.0, float(np.abs(f(0.37 * T, cfg)).max()))
        assert np.abs(avg).max() <= 1e-8 * scale


def test_scaled_keeps_multipliers():
    s = TWO_TONE.scaled(2.0)
    assert s.multipliers == (1, 7) and s.base_frequency == 20.0
    assert TWO_TONE.amplitude_norm == pytest.approx(math.sqrt(0.02))
