import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from tacnode.errors import CaseError, DomainError
from tacnode.phase import (
    EndpointPair,
    Phase,
    boundary_temperature,
    classify_phase,
    mp_endpoints,
    scaling_params,
    t_star,
)

positive = st.floats(0.05, 20.0)
interior = st.floats(0.01, 0.99)


def test_t_star_examples():
    assert t_star(0.5, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert t_star(1.0, 0.25) == pytest.approx(2.0 / 3.0, abs=1e-15)


@pytest.mark.parametrize("a, b", [(0.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
def test_t_star_rejects_bad_endpoints(a, b):
    with pytest.raises(DomainError):
        t_star(a, b)


@given(positive, positive)
def test_t_star_swap(a, b):
    assert t_star(a, b) + t_star(b, a) == pytest.approx(1.0, abs=1e-14)
    assert 0.0 < t_star(a, b) < 1.0


def test_mp_endpoints_at_tacnode():
    p, q = mp_endpoints(0.5, 0.5, 0.5, 1.0)
    assert p == pytest.approx(0.0, abs=1e-15)
    assert q == pytest.approx(2.0, abs=1e-14)


def test_mp_endpoints_reaching_hard_edge():
    with pytest.raises(CaseError):
        mp_endpoints(0.5, 0.5, 0.5, 1.5)


@given(positive, positive, interior, st.floats(0.01, 5.0))
def test_mp_endpoints_ordered(a, b, t, T):
    try:
        p, q = mp_endpoints(a, b, t, T)
    except CaseError:
        centre = (1 - t) * math.sqrt(a) + t * math.sqrt(b)
        assert centre < math.sqrt(2 * t * (1 - t) * T)
        return
    assert 0.0 <= p < q


@given(positive, positive, interior)
def test_p_vanishes_on_tangency_curve(a, b, t):
    centre = (1 - t) * math.sqrt(a) + t * math.sqrt(b)
    T = centre ** 2 / (2 * t * (1 - t))
    p, q = mp_endpoints(a, b, t, T)
    assert p <= 1e-12 * q


def test_boundary_temperature_examples():
    assert boundary_temperature(0.5, 0.5, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert boundary_temperature(0.5, 0.5, 0.1) == pytest.approx((0.5 * 0.81 + 0.005) / 0.09)
    for t in (0.0, 1.0):
        with pytest.raises(DomainError):
            boundary_temperature(0.5, 0.5, t)


@pytest.mark.parametrize("a, b", [(0.5, 0.5), (1.0, 0.25), (0.1, 2.5), (3.0, 0.7)])
def test_boundary_minimum(a, b):
    res = minimize_scalar(lambda t: boundary_temperature(a, b, t), bounds=(1e-3, 1 - 1e-3),
                          method="bounded", options={"xatol": 1e-10})
    assert res.fun == pytest.approx(2.0 * math.sqrt(a * b), rel=1e-9)
    assert res.x == pytest.approx(t_star(a, b), abs=1e-5)


@given(positive, positive, interior)
def test_boundary_swap_symmetry(a, b, t):
    assert boundary_temperature(a, b, t) == pytest.approx(boundary_temperature(b, a, 1 - t),
                                                          rel=1e-13)


@given(st.floats(0.05, 5.0))
def test_boundary_at_t_star_is_one(a):
    b = 0.25 / a
    assert boundary_temperature(a, b, t_star(a, b)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("t, T, label", [
    (0.5, 0.8, Phase.CASE_I),
    (0.5, 1.5, Phase.CASE_III),
    (0.1, 1.5, Phase.CASE_II),
    (0.5, 1.0, Phase.TACNODE),
    (0.1, 1.0, Phase.BOUNDARY_I_II),
])
def test_classify_examples(t, T, label):
    assert classify_phase(0.5, 0.5, t, T) is label


def test_classify_boundary_ii_iii():
    T = boundary_temperature(0.5, 0.5, 0.2)
    assert classify_phase(0.5, 0.5, 0.2, T) is Phase.BOUNDARY_II_III
    assert classify_phase(0.5, 0.5, 0.2, T * (1 + 1e-9)) is Phase.CASE_III


def test_classify_requires_critical_product():
    with pytest.raises(DomainError):
        classify_phase(1.0, 1.0, 0.5, 1.0)


def test_phase_prints_as_label():
    assert str(Phase.CASE_II) == "CaseII"


@settings(max_examples=200)
@given(st.floats(0.05, 5.0), interior, st.floats(0.05, 10.0))
def test_classify_swap_invariance(a, t, T):
    b = 0.25 / a
    assert classify_phase(a, b, t, T) is classify_phase(b, a, 1 - t, T)


@given(st.floats(0.05, 5.0), interior, st.floats(0.05, 0.999))
def test_case_one_has_interval(a, t, T):
    # below T = 1 the support never reaches the hard edge
    b = 0.25 / a
    assert classify_phase(a, b, t, T) is Phase.CASE_I
    p, q = mp_endpoints(a, b, t, T)
    assert p > 0


def test_scaling_params_examples():
    r2 = 2 * math.sqrt(2)
    assert scaling_params(0.5, 0.5, 0, 0) == pytest.approx((0, 0, r2))
    assert scaling_params(0.5, 0.5, 1, 0) == pytest.approx((2, -2, r2))
    assert scaling_params(0.5, 0.5, 0, 1, 1, 0)[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        scaling_params(1.0, 1.0, 0, 0)


@given(st.floats(0.05, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_scaling_params_tau_relation(a, K, L):
    # s* = (tau*^2 - L) / 2 whatever the endpoints
    s, tau, kappa = scaling_params(a, 0.25 / a, K, L)
    assert s == pytest.approx((tau * tau - L) / 2, abs=1e-9 * (1 + tau * tau))
    assert kappa >= 2.0


def test_endpoint_pair():
    assert EndpointPair(0.5, 0.5).critical
    assert not EndpointPair(1.0, 1.0).critical
    with pytest.raises(DomainError):
        EndpointPair(-1.0, 1.0)
