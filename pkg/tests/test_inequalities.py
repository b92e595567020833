import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from orthoplab.energy import g
from orthoplab.inequalities import (
    Q_GRID,
    CatalogueMiss,
    FBetaSpec,
    F_beta,
    F_lower_constant,
    F_minus,
    F_plus,
    F_upper_constant,
    Z_of_zeta,
    Zeta,
    battery_csv,
    check_cor_dibene,
    check_dibene,
    check_F_bounds,
    elementary_constants,
    equality_witnesses,
    run_batteries,
    xi_delta,
)


def F_quad(p, beta, t):
    """Adaptive quadrature of the defining integral; the test oracle."""
    if t <= beta:
        return 0.0
    f = lambda s: (p / 2) * abs(s) ** ((p - 2) / 2) * (s - beta)
    pts = [0.0] if beta < 0 < t else None
    return quad(f, beta, t, points=pts, epsabs=0, epsrel=1e-13, limit=200)[0]


def test_F_below_beta_vanishes():
    assert F_beta(FBetaSpec(4.0, 1.0), 0.5) == 0.0
    assert F_beta(FBetaSpec(4.0, 1.0), 1.0) == 0.0


def test_F_at_beta_zero():
    for p in (2.5, 4.0, 7.0):
        assert F_beta(FBetaSpec(p, 0.0), 1.7) == pytest.approx(p / (p + 2) * 1.7 ** ((p + 2) / 2), rel=1e-14)


def test_F_hand_integral():
    assert F_beta(FBetaSpec(4.0, 1.0), 2.0) == pytest.approx(5 / 3, rel=1e-14)


def test_F_matches_quadrature():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        p = rng.uniform(2.05, 6.0)
        beta = rng.uniform(-3, 3)
        t = beta + rng.uniform(0, 5) * rng.choice([1e-3, 1.0])
        exact = F_quad(p, beta, t)
        if exact == 0:
            continue
        worst = max(worst, abs(F_beta(FBetaSpec(p, beta), t) - exact) / exact)
    assert worst <= 1e-9


def test_F_is_nondecreasing():
    t = np.linspace(-2, 5, 2001)
    for beta in (-1.0, 0.0, 0.7):
        assert np.all(np.diff(F_beta(FBetaSpec(4.0, beta), t)) >= 0)


def test_F_scale_invariance():
    p, beta, t = 3.5, 2.3, 4.1
    assert F_beta(FBetaSpec(p, beta), t) == pytest.approx(beta ** ((p + 2) / 2) * F_plus(t / beta, p), rel=1e-13)
    assert F_beta(FBetaSpec(p, -beta), t) == pytest.approx(beta ** ((p + 2) / 2) * F_minus(t / beta, p), rel=1e-13)


def test_F_needs_p_above_two():
    with pytest.raises(ValueError):
        FBetaSpec(2.0, 0.0)


def test_F_bounds_trivial_and_equality_shape():
    chk = check_F_bounds(FBetaSpec(4.0, 1.0), [-3.0, 0.0, 1.0])
    assert chk.lower_ok and chk.upper_ok and chk.lower_ratio == chk.upper_ratio == 0.0
    chk = check_F_bounds(FBetaSpec(4.0, 0.0), np.linspace(0.01, 10, 500))
    assert chk.lower_ok and chk.upper_ok


def test_F_bounds_sweep_with_C8():
    chk = check_F_bounds(FBetaSpec(4.0, -1.0), np.linspace(-1, 10, 10_000), C=8.0)
    assert chk.lower_ok and chk.upper_ok and chk.slack > 0


def test_F_constants():
    assert F_lower_constant(4.0, 1.0) == pytest.approx(2.0)
    assert F_upper_constant(4.0, 1.0) == pytest.approx(2.0)
    assert F_upper_constant(4.0, -1.0) == pytest.approx(2.5)
    assert F_lower_constant(4.0, -1.0) == pytest.approx(5.1213, abs=1e-4)
    assert F_lower_constant(6.0, -1.0) == pytest.approx(12.0, rel=1e-6)


def test_F_lower_constant_is_sharp_for_negative_beta():
    p = 4.0
    X = np.expm1(np.linspace(-20, 20, 200_001))
    ratio = (X + 1) ** ((p + 2) / 2) / F_minus(X, p)
    assert ratio.max() <= F_lower_constant(p, -1.0)
    assert ratio.max() >= F_lower_constant(p, -1.0) * (1 - 1e-6)


def test_dibene_cases():
    lhs, rhs, ok = check_dibene(1.5, [0.3, 0.4], [0.3, 0.4])
    assert lhs == rhs == 0 and ok
    lhs, rhs, ok = check_dibene(1.5, [0.0, 0.0], [0.0, 0.0])
    assert ok
    lhs, rhs, ok = check_dibene(2.0, [1.0, 2.0], [-0.5, 3.0])
    assert lhs == pytest.approx(rhs, rel=1e-15) and ok
    lhs, rhs, ok = check_dibene(1.5, [1.0, 0.0], [-1.0, 0.0])
    assert lhs == pytest.approx(2.0) and rhs == pytest.approx(2.0) and ok
    with pytest.raises(ValueError):
        check_dibene(2.5, [1.0], [0.0])


def test_cor_dibene_cases():
    lhs, rhs, ok = check_cor_dibene(1.5, 0.3, 0.7, 0.7)
    assert lhs == rhs == 0 and ok
    lhs, rhs, ok = check_cor_dibene(2.0, 0.3, 1.7, -0.4)
    assert lhs == pytest.approx(rhs, rel=1e-15) and ok
    lhs, rhs, ok = check_cor_dibene(1.5, 0.25, 1.0, 0.0)
    assert lhs == pytest.approx(1.25 ** (-1 / 8), rel=1e-14)
    assert rhs == pytest.approx(2 ** 0.25, rel=1e-14) and ok


@given(st.sampled_from(Q_GRID), st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4))
def test_dibene_property(q, z):
    assert check_dibene(q, z[:2], z[2:])[2]


@given(st.sampled_from(Q_GRID), st.floats(0, 100), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_cor_dibene_property(p, eps, t, s):
    assert check_cor_dibene(p, eps, t, s)[2]


@given(st.floats(2.1, 8.0), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_elementary_inequalities(p, t, s):
    a = (p - 2) / 2
    c = elementary_constants(p)
    diff = abs(g(a, t) - g(a, s))
    assert abs(t - s) ** p <= c["square"] * diff**2 * (1 + 1e-12) + 1e-300
    assert diff <= c["lipschitz"] * (abs(t) ** a + abs(s) ** a) * abs(t - s) * (1 + 1e-12) + 1e-300


def test_batteries_have_no_violations():
    rows = run_batteries(samples=100_000, seed=0)
    assert len(rows) == 5 + 5 + 4 * 4 + 1
    bad = [(r.id, r.worst_ratio) for r in rows if not r.ok]
    assert not bad
    sharp = {r.id: r.worst_ratio for r in rows}
    assert sharp["dibene_q1.5"] > 0.99 and sharp["elementary_square_p4"] > 0.99


def test_battery_is_deterministic():
    assert battery_csv(run_batteries(2000, seed=3)) == battery_csv(run_batteries(2000, seed=3))


def test_battery_csv_layout():
    text = battery_csv(run_batteries(500, seed=1))
    lines = text.splitlines()
    assert lines[0] == "id,samples,worst_ratio,argmax"
    assert lines[1].startswith("dibene_q1.1,500,")


def test_equality_witnesses():
    for name, lhs, rhs in equality_witnesses():
        assert lhs == pytest.approx(rhs, rel=1e-12), name


def test_g_composition_covers_nonlinear_transform():
    # g_{alpha-1}(t) = g_{2 alpha/p - 1}(g_{(p-2)/2}(t))
    p, alpha, t = 4.0, 3.0, np.array([-2.5, -0.1, 0.0, 0.3, 4.0])
    np.testing.assert_allclose(g(alpha - 1, t), g(2 * alpha / p - 1, g((p - 2) / 2, t)), rtol=1e-13)


def test_Z_closed_forms():
    t = np.linspace(-2, 3, 11)
    np.testing.assert_array_equal(Z_of_zeta("identity", t), t)
    assert Z_of_zeta("identity", 0.0) == 0.0
    assert Z_of_zeta("square", 2.0) == pytest.approx(2 * math.sqrt(2) / 3 * 2**1.5, rel=1e-14)
    with pytest.raises(CatalogueMiss):
        Z_of_zeta("cubic", 1.0)


@pytest.mark.parametrize(
    "zeta", [Zeta("identity"), Zeta("square"), Zeta("positive_part_sq", beta=0.4), Zeta("xi", beta=-0.2, delta=0.5),
             Zeta("constant", c=2.0)]
)
def test_Z_matches_quadrature(zeta):
    for t in (-1.3, -0.1, 0.35, 0.9, 2.7):
        exact = quad(lambda s: math.sqrt(abs(float(zeta.deriv(s)))), 0.0, t, epsrel=1e-12, limit=200,
                     points=[p for p in (0.0, zeta.beta, zeta.beta + zeta.delta) if min(0, t) < p < max(0, t)] or None)[0]
        assert Z_of_zeta(zeta, t) == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_Z_monotone_for_monotone_zeta():
    t = np.linspace(-3, 3, 601)
    for zeta in (Zeta("identity"), Zeta("positive_part_sq", beta=0.5), Zeta("xi", delta=0.3)):
        assert zeta.monotone
        assert np.all(np.diff(Z_of_zeta(zeta, t)) >= 0)


def test_xi_delta():
    assert xi_delta(2.0, 2.0) == (2.0, 3.0)
    assert xi_delta(-1.0, 0.5) == (0.0, 0.0)
    assert xi_delta(1.0, 2.0) == (0.25, 0.75)
    with pytest.raises(ValueError):
        xi_delta(1.0, 0.0)


@given(st.floats(1e-3, 10))
def test_xi_delta_is_C1(delta):
    s = 1e-9 * delta
    for joint in (0.0, delta):
        lo, hi = xi_delta(joint - s, delta), xi_delta(joint + s, delta)
        assert abs(hi[0] - lo[0]) <= 1e-7 * delta
        assert abs(hi[1] - lo[1]) <= 1e-7
    t = np.linspace(-delta, 3 * delta, 401)
    _, der = xi_delta(t, delta)
    assert np.all(der <= 3.0) and np.all(der >= 0)
