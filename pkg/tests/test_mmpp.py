import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from ofdma_cac.errors import InvalidParams
from ofdma_cac.mmpp import MmppParams, mean_rate, phase_transition_matrix, steady_state

rates = st.floats(min_value=1e-3, max_value=5.0)
durations = st.floats(min_value=0.0, max_value=50.0)


@pytest.mark.parametrize(
    "q01, q10, expected",
    [(0.2, 0.2, (0.5, 0.5)), (0.2, 0.3, (0.6, 0.4)), (0.0, 0.5, (1.0, 0.0))],
)
def test_steady_state_examples(q01, q10, expected):
    assert steady_state(MmppParams(q01, q10, 1.0, 2.0)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(q01=0.0, q10=0.0, lambda0=1, lambda1=1),
    dict(q01=-0.1, q10=0.3, lambda0=1, lambda1=1),
    dict(q01=0.1, q10=0.3, lambda0=-1, lambda1=1),
    dict(q01=0.1, q10=math.nan, lambda0=1, lambda1=1),
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidParams):
        MmppParams(**kwargs)


def test_mean_rate_examples():
    assert mean_rate(MmppParams(0.7, 0.1, 3.0, 3.0)) == pytest.approx(3.0, rel=1e-15)
    assert mean_rate(MmppParams(0.25, 0.25, 1.0, 2.0)) == pytest.approx(1.5, rel=1e-15)
    assert mean_rate(MmppParams(0.2, 0.3, 1.0, 2.0)) == pytest.approx(1.4, rel=1e-15)


def test_phase_matrix_identity_and_limit():
    p = MmppParams(0.2, 0.3, 1.0, 2.0)
    np.testing.assert_array_equal(phase_transition_matrix(p, 0.0), np.eye(2))
    far = phase_transition_matrix(p, 1e4)
    np.testing.assert_allclose(far, [[0.6, 0.4], [0.6, 0.4]], atol=1e-15)


def test_phase_matrix_one_frame_value():
    P = phase_transition_matrix(MmppParams(0.2, 0.2, 1.0, 2.0), 1.0)
    # 0.5 + 0.5 * exp(-0.4)
    assert P[0, 0] == pytest.approx(0.8351600230178197, abs=1e-15)
    assert P[0, 0] == pytest.approx(0.835160, abs=1e-6)


def test_negative_duration_rejected():
    with pytest.raises(InvalidParams):
        phase_transition_matrix(MmppParams(0.2, 0.2, 1.0, 2.0), -1.0)


@settings(max_examples=60, deadline=None)
@given(rates, rates, durations)
def test_matches_matrix_exponential(q01, q10, t):
    p = MmppParams(q01, q10, 1.0, 2.0)
    gen = np.array([[-q01, q01], [q10, -q10]])
    np.testing.assert_allclose(phase_transition_matrix(p, t), linalg.expm(gen * t), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(rates, rates, durations)
def test_steady_state_is_fixed_point(q01, q10, t):
    p = MmppParams(q01, q10, 1.0, 2.0)
    pi = np.array(steady_state(p))
    assert pi.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(pi @ phase_transition_matrix(p, t), pi, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(rates, rates, durations, durations)
def test_chapman_kolmogorov(q01, q10, s, t):
    p = MmppParams(q01, q10, 1.0, 2.0)
    lhs = phase_transition_matrix(p, s) @ phase_transition_matrix(p, t)
    np.testing.assert_allclose(lhs, phase_transition_matrix(p, s + t), atol=1e-12)
    np.testing.assert_allclose(lhs.sum(axis=1), 1.0, atol=1e-15)


@given(rates, rates, st.floats(0, 40), st.floats(0, 40))
def test_mean_rate_is_dot_product(q01, q10, l0, l1):
    p = MmppParams(q01, q10, l0, l1)
    pi0, pi1 = steady_state(p)
    assert mean_rate(p) == pytest.approx(pi0 * l0 + pi1 * l1, rel=1e-14, abs=1e-300)
