import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tacnode.errors import DomainError
from tacnode.laxpair import (
    DEFAULT_ZETAS,
    MParams,
    check_compatibility,
    entries_from_pii,
    lax_U,
    lax_V,
    lax_W,
    x_star,
)


def test_x_star():
    assert x_star(1.0, 0.0) == pytest.approx(2 ** (2 / 3) * 2)
    assert x_star(0.5, 1.0) == 0.0


def test_large_s_asymptotics(hm):
    sol = hm(0.75)
    e = entries_from_pii(sol, 5.0, 0.0)
    assert abs(e.d - 0.75 / 20) < 5e-3
    assert abs(e.c - 25.0) < 0.1
    e = entries_from_pii(sol, -5.0, 0.0)
    assert abs(e.d - math.sqrt(5.0)) < 2e-2


@settings(max_examples=40, deadline=None)
@given(s=st.floats(-3.0, 3.0), tau=st.floats(-1.0, 1.0))
def test_identities_and_reality(hm, s, tau):
    e = entries_from_pii(hm(0.75), s, tau)
    assert abs(e.h - e.b + 2 * tau * e.d) < 1e-13 * max(1.0, abs(e.b))
    assert abs(e.g_plus_a + e.c ** 2 - e.d ** 2 - s) < 1e-12 * max(1.0, e.c ** 2)
    for v in (e.b, e.c, e.d, e.f, e.h, e.g_plus_a):
        assert isinstance(v, float) and math.isfinite(v)


def test_h_equals_b_at_tau_zero(hm):
    for s in (-2.0, 0.0, 1.5):
        e = entries_from_pii(hm(0.75), s, 0.0)
        assert e.h == e.b


@pytest.mark.parametrize("tau", [0.5, -0.5])
def test_b_reduction_against_tau_difference(hm, tau):
    sol = hm(0.75)
    s = 0.7
    dt = 1e-4
    d = lambda t: entries_from_pii(sol, s, t).d  # noqa: E731
    dd = (d(tau + dt) - d(tau - dt)) / (2 * dt)
    qp = sol.qprime_at(x_star(s, tau))
    assert abs(dd / (4 * tau) + 2 ** (-2 / 3) * qp) < 1e-6


def test_outside_interval(hm):
    with pytest.raises(DomainError):
        entries_from_pii(hm(0.75), 20.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(-2.0, 2.0), tau=st.floats(-1.0, 1.0),
       re=st.floats(-3.0, 3.0), im=st.floats(-3.0, 3.0))
def test_traceless(hm, s, tau, re, im):
    z = complex(re, im)
    if abs(z) < 1e-3:
        z = 1.0
    e = entries_from_pii(hm(0.75), s, tau)
    for A in (lax_U(e, z), lax_V(e, z), lax_W(e, z)):
        assert abs(np.trace(A)) < 1e-12 * max(1.0, np.max(np.abs(A)))


def test_U_pole_and_residue(hm):
    e = entries_from_pii(hm(0.75), 0.3, 0.2)
    with pytest.raises(DomainError):
        lax_U(e, 0.0)
    eps = 1e-7
    res = eps * (lax_U(e, eps) - lax_U(e, -eps)) / 2
    expected = np.zeros((4, 4))
    expected[0, 1] = expected[1, 0] = 0.75
    expected[2, 3] = expected[3, 2] = -0.75
    assert np.allclose(res, expected, atol=1e-12)


def test_V_at_tau_zero_and_linearity(hm):
    e = entries_from_pii(hm(0.75), 0.3, 0.0)
    V = lax_V(e, 0.4 + 0.1j)
    assert V[2, 1] == 0 and V[3, 0] == 0
    slope = lax_V(e, 1.0) - lax_V(e, 0.0)
    expected = np.zeros((4, 4), dtype=complex)
    expected[2, 0] = expected[3, 1] = -2j
    assert np.allclose(slope, expected)


def test_W_pattern(hm):
    e = entries_from_pii(hm(0.75), 0.3, 0.4)
    W = lax_W(e, 0.0)
    assert W[0, 3] == -2j * e.d and W[1, 2] == 2j * e.d
    assert np.all(np.isfinite(W))


def test_mparams_validation():
    assert MParams(0.75, 0.0, 0.0).validate().nu == 0.75
    with pytest.raises(DomainError):
        MParams(-0.6, 0.0, 0.0).validate()
    with pytest.raises(DomainError):
        MParams(0.75, 0.0, 0.0, r1=2.0).validate()
    with pytest.raises(DomainError):
        MParams(0.75, float("nan"), 0.0).validate()


def test_compatibility_example(hm):
    rep = check_compatibility(hm(0.75), 0.5, 0.0)
    r = rep.as_dict()
    assert r["c_s"] < 1e-6
    assert r["d_ss"] < 1e-4
    assert r["zero_curvature_s"] < 1e-6
    assert len(DEFAULT_ZETAS) == 3


@pytest.mark.parametrize("nu", [0.25, 0.75])
@pytest.mark.parametrize("tau", [0.0, 0.5])
@pytest.mark.parametrize("s", [-2.0, -0.5, 0.5, 2.0])
def test_compatibility_grid(hm, nu, s, tau):
    r = check_compatibility(hm(nu), s, tau).as_dict()
    for key, val in r.items():
        limit = 1e-4 if key == "d_ss" else 1e-6
        assert val < limit, (key, val)
