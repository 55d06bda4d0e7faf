import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma, iv

from tacnode.errors import DomainError, SingularGram
from tacnode.finiten import (
    WeightSystem,
    build_model,
    composite_rule,
    eval_weights,
    finite_kernel,
    kernel_trace,
    precision_bits,
    reproducing_defect,
    scaling_compare,
)

WS8 = WeightSystem(0.5, 0.5, 1.0, 0.5, 8, 0.25)


@pytest.fixture(scope="module")
def model8():
    return build_model(WS8)


def test_multi_index_sizes():
    assert (WS8.n1, WS8.n2) == (4, 4)
    assert (WeightSystem(0.5, 0.5, 1.0, 0.5, 6, 0.0).n1, WeightSystem(0.5, 0.5, 1.0, 0.5, 6, 0.0).n2) == (3, 3)


def test_weight_ratio():
    x = 0.37
    w11, w12, _, _ = eval_weights(WS8, x)
    z = 2 * 8 * math.sqrt(0.5 * x) / 0.5
    assert w12 / w11 == pytest.approx(math.sqrt(x) * iv(1.25, z) / iv(0.25, z), rel=1e-12)


def test_weight_small_x():
    x = 1e-8
    c = 8 / 0.5
    lead = x ** 0.25 * (8 * math.sqrt(0.5) / 0.5) ** 0.25 / gamma(1.25) * math.exp(-c * x)
    # leading term alone, then with the first series correction (z/2)^2 / (alpha + 1)
    assert eval_weights(WS8, x)[0] == pytest.approx(lead, rel=2e-6)
    half_z = c * math.sqrt(0.5 * x)
    assert eval_weights(WS8, x)[0] == pytest.approx(lead * (1 + half_z ** 2 / 1.25), rel=1e-11)


def test_weights_match_direct_formula():
    x = 0.8
    c1, c2 = 16.0, 16.0
    a = b = 0.5
    al = 0.25
    direct = (x ** (al / 2) * math.exp(-c1 * x) * iv(al, 2 * c1 * math.sqrt(a * x)),
              x ** ((al + 1) / 2) * math.exp(-c1 * x) * iv(al + 1, 2 * c1 * math.sqrt(a * x)),
              x ** (-al / 2) * math.exp(-c2 * x) * iv(al, 2 * c2 * math.sqrt(b * x)),
              x ** (-(al - 1) / 2) * math.exp(-c2 * x) * iv(al - 1, 2 * c2 * math.sqrt(b * x)))
    assert np.allclose(eval_weights(WS8, x), direct, rtol=1e-12, atol=0)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(1e-10, 50.0), alpha=st.floats(0.0, 3.0), n=st.sampled_from([2, 8, 40, 400]))
def test_weights_positive(x, alpha, n):
    ws = WeightSystem(0.5, 0.5, 1.0, 0.4, n, alpha)
    w = eval_weights(ws, x)
    assert all(v > 0 and math.isfinite(v) for v in w) or min(w) == 0.0


def test_w22_changes_sign_for_negative_alpha():
    ws = WeightSystem(0.5, 0.5, 1.0, 0.5, 4, -0.5)
    assert eval_weights(ws, 1e-6)[3] < 0
    assert eval_weights(ws, 1.0)[3] > 0


def test_weight_domain():
    with pytest.raises(DomainError):
        eval_weights(WS8, 0.0)
    with pytest.raises(DomainError):
        WeightSystem(0.5, 0.5, 1.0, 0.5, 7, 0.0)
    with pytest.raises(DomainError):
        WeightSystem(0.5, 0.5, 1.0, 1.0, 8, 0.0)
    with pytest.raises(DomainError):
        WeightSystem(0.5, 0.5, 1.0, 0.5, 8, -1.0)


@pytest.mark.parametrize("alpha", [-0.9, -0.5, 0.0, 0.25, 1.7])
def test_composite_rule_integrates_power_times_smooth(alpha):
    rule = composite_rule(3.0, 400, alpha=alpha)
    got = np.sum(rule.weights * rule.nodes ** alpha * np.exp(-rule.nodes))
    expected = quad(lambda x: np.exp(-x), 0, 3.0, weight="alg", wvar=(alpha, 0))[0]
    assert got == pytest.approx(expected, rel=1e-12)


def test_two_path_brute_force():
    ws = WeightSystem(0.5, 0.5, 1.0, 0.5, 2, 0.25)
    model = build_model(ws)
    X = model.X_cut

    def w(i, x):
        return eval_weights(ws, x)[i]

    G = np.array([[quad(lambda x: w(i, x) * w(2 + j, x), 0, X, epsabs=0, epsrel=1e-13, limit=400)[0]
                   for j in range(2)] for i in range(2)])
    x, y = 0.3, 0.7
    f = np.array([w(0, x), w(1, x)])
    g = np.array([w(2, y), w(3, y)])
    expected = f @ np.linalg.inv(G).T @ g
    assert finite_kernel(model, x, y) == pytest.approx(expected, rel=1e-9)


def test_projection_small(model8):
    assert abs(kernel_trace(model8) - 8) < 1e-6
    assert abs(reproducing_defect(model8, 0.01, 0.02)) < 1e-6


def test_quadrature_doubling(model8):
    fine = build_model(WS8, quad_size=2 * model8.quad_size)
    assert abs(finite_kernel(fine, 0.01, 0.02) - finite_kernel(model8, 0.01, 0.02)) < 1e-8


def test_determinantal_positivity(model8):
    pts = [0.01, 0.03]
    K = np.array([[finite_kernel(model8, x, y) for y in pts] for x in pts])
    assert np.linalg.det(K) >= -1e-8
    for x in np.geomspace(1e-4, model8.X_cut * 0.99, 25):
        assert finite_kernel(model8, x, x) >= -1e-8


def test_three_point_minor(model8):
    pts = [0.05, 0.4, 1.1]
    K = np.array([[finite_kernel(model8, x, y) for y in pts] for x in pts])
    assert np.linalg.det(K) >= -1e-8


def test_low_precision_is_singular():
    with pytest.raises(SingularGram) as info:
        build_model(WS8, precision_bits_=53)
    assert info.value.condition > 1e10


def test_precision_env(monkeypatch):
    monkeypatch.setenv("TACNODE_PRECISION_BITS", "300")
    assert precision_bits() == 300
    monkeypatch.delenv("TACNODE_PRECISION_BITS")
    assert precision_bits() == 256
    with pytest.raises(DomainError):
        precision_bits(20)


def test_quad_size_lower_bound():
    with pytest.raises(DomainError):
        build_model(WS8, quad_size=16)


def _unit_limit(grid):
    return {(u, v): 1.0 for u in grid for v in grid}


def test_scaling_parameters_and_varying_endpoints():
    grid = (1.0,)
    base = scaling_compare(4, 0.0, 0.0, grid=grid, limit=_unit_limit(grid), quad_size=256)
    assert (base.s, base.tau) == (0.0, 0.0)
    assert base.kappa == pytest.approx(2 * math.sqrt(2))
    shifted = scaling_compare(4, 0.0, 0.0, grid=grid, L1=0.5, L2=0.3, limit=_unit_limit(grid),
                              quad_size=256)
    assert shifted.s == pytest.approx(0.4)
    assert shifted.tau == base.tau
    assert shifted.a == pytest.approx(0.5 * (1 + 2 * 0.5 * 4 ** (-2 / 3)))


def test_scaling_rejects_noncritical_and_odd():
    with pytest.raises(DomainError):
        scaling_compare(8, 0.0, 0.0, a=1.0, b=1.0)
    with pytest.raises(DomainError):
        scaling_compare(7, 0.0, 0.0)


def test_scaling_with_K_one_needs_t_below_one():
    # t = 1/2 + 8^(-1/3) = 1 leaves the admissible time range
    with pytest.raises(DomainError):
        scaling_compare(8, 1.0, 0.0, limit=_unit_limit((1.0,)), grid=(1.0,))
