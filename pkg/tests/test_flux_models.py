import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from agingheat.flux_models import (
    ConsistencyWarning,
    FactorizationError,
    FluxModelParams,
    burgers_compatible_qdot,
    consistency_report,
    decompose_burgers,
    exp_convolution,
    max_gap,
    maxwell_kernel,
    quintanilla_kernel,
    rate_and_integral,
    signal_constant,
    signal_decaying_exp,
    signal_piecewise_constant,
    signal_ramp,
    signal_sine,
    simulate_burgers_integral,
    simulate_burgers_rate,
    simulate_maxwell_integral,
    simulate_maxwell_rate,
    simulate_quintanilla_integral,
    simulate_quintanilla_rate,
)


def grid(T, dt):
    return np.linspace(0.0, T, int(round(T / dt)) + 1)


# --- Burgers factorization -----------------------------------------------------

def test_decompose_examples():
    assert decompose_burgers(3, 2) == pytest.approx((1.0, 2.0), rel=1e-15)
    assert decompose_burgers(2, 1) == pytest.approx((1.0, 1.0), rel=1e-15)
    with pytest.raises(FactorizationError):
        decompose_burgers(1, 1)


@settings(max_examples=60, deadline=None)
@given(xi0=st.floats(1e-3, 1e3), excess=st.floats(0.0, 10.0))
def test_decompose_roots(xi0, excess):
    nu0 = 2 * math.sqrt(xi0) * (1 + excess)
    mu1, mu2 = decompose_burgers(nu0, xi0)
    assert 0 < mu1 <= mu2
    assert mu1 + mu2 == pytest.approx(nu0, rel=1e-12)
    assert mu1 * mu2 == pytest.approx(xi0, rel=1e-12)


# --- consistency -------------------------------------------------------------------

def test_consistency_examples():
    rep = consistency_report(FluxModelParams(kappa0=1, xi0=1, h0=1, nu0=2))
    assert rep["td_consistency: h0 > 0"]["margin"] == 1
    assert rep["td_consistency: nu0^2*kappa0 - xi0*h0 >= 0"]["margin"] == 3
    q = consistency_report(FluxModelParams(kappa0=1, xi0=2, h0=1))["quintanilla: kappa0 > xi0*h0"]
    assert not q["holds"] and q["margin"] == -1
    assert not consistency_report(FluxModelParams(h0=0))["td_consistency: h0 > 0"]["holds"]


def test_burgers_weight_and_strong_condition():
    rep = consistency_report(FluxModelParams(kappa0=1, xi0=2, h0=0.1, nu0=3))
    w = rep["burgers_weight: nu0*kappa0 - mu1*h0 > 0"]
    assert w["holds"] and w["margin"] == pytest.approx(2.9, rel=1e-14)
    s = rep["burgers_strong: nu0^2*kappa0 - xi0*h0 > mu1^2*h0"]
    assert s["holds"] and s["margin"] == pytest.approx(8.8 - 0.1, rel=1e-14)


def test_complex_roots_reported_not_raised():
    rep = consistency_report(FluxModelParams(nu0=1, xi0=1))
    assert rep["burgers_factorization"]["holds"] is False


# --- Maxwell ---------------------------------------------------------------------

def test_maxwell_constant_gradient():
    p = FluxModelParams(kappa0=1, xi0=0.5)
    exact = -(1 - math.exp(-2))
    for sim in (lambda t: simulate_maxwell_rate(p, signal_constant(), 0.0, t),
                lambda t: simulate_maxwell_integral(p, signal_constant(), t)):
        e1 = abs(sim(grid(1, 1e-2)).q[-1] - exact)
        e2 = abs(sim(grid(1, 5e-3)).q[-1] - exact)
        assert e1 < 1e-4
        assert e1 / e2 == pytest.approx(4, rel=0.05) or e2 < 1e-12


def test_maxwell_steady_state():
    p = FluxModelParams(kappa0=1.7, xi0=0.3)
    assert simulate_maxwell_rate(p, signal_constant(), 0.0, grid(20, 1e-2)).q[-1] == pytest.approx(-1.7, rel=1e-9)


def test_maxwell_zero_signal():
    tr = simulate_maxwell_integral(FluxModelParams(), signal_constant(0.0), grid(2, 1e-2))
    assert np.all(tr.q == 0.0)


def test_maxwell_ramp_convolution():
    p = FluxModelParams(kappa0=1, xi0=1)
    q = simulate_maxwell_integral(p, signal_ramp(), grid(2, 1e-3)).q[-1]
    assert q == pytest.approx(-(2 - 1 + math.exp(-2)), abs=1e-6)


def test_maxwell_kernel_identification():
    p = FluxModelParams(kappa0=3, xi0=0.5)
    k = maxwell_kernel(p)
    # k(0) = kappa0/xi0, which differs from the conductivity kappa0 = int k
    assert k(0.0, 0.0) == pytest.approx(6.0)
    mass, _ = integrate.quad(lambda s: float(k(0.0, s)), 0, np.inf)
    assert mass == pytest.approx(3.0, rel=1e-10)


# --- Quintanilla -----------------------------------------------------------------

def test_quintanilla_reduces_to_maxwell():
    p = FluxModelParams(kappa0=1.3, xi0=0.7, h0=0.0)
    t = grid(2, 1e-2)
    for sig in (signal_sine(), signal_ramp()):
        np.testing.assert_allclose(simulate_quintanilla_rate(p, sig, 0.0, t).q,
                                   simulate_maxwell_rate(p, sig, 0.0, t).q, atol=1e-14)
        np.testing.assert_allclose(simulate_quintanilla_integral(p, sig, t).q,
                                   simulate_maxwell_integral(p, sig, t).q, atol=1e-14)


def test_quintanilla_integral_constant_gradient():
    # q' + q = -1 - t/2 with q(0) = 0 gives q = -(1 + t)/2 + e^{-t}/2
    p = FluxModelParams(kappa0=1, xi0=1, h0=0.5)
    exact = -1.5 + 0.5 * math.exp(-2)
    assert exact == pytest.approx(-1.4323323583816936, rel=1e-15)
    q = simulate_quintanilla_integral(p, signal_constant(), grid(2, 1e-3)).q[-1]
    assert q == pytest.approx(exact, abs=1e-6)


def test_quintanilla_long_time_slope():
    p = FluxModelParams(kappa0=1, xi0=1, h0=0.5)
    tr = simulate_quintanilla_rate(p, signal_constant(), 0.0, grid(30, 1e-2))
    slope = (tr.q[-1] - tr.q[-101]) / (tr.t[-1] - tr.t[-101])
    assert slope == pytest.approx(-0.5, rel=1e-9)


def test_quintanilla_homogeneous_decay():
    p = FluxModelParams(kappa0=1, xi0=0.8, h0=0.3)
    tr = simulate_quintanilla_rate(p, signal_constant(0.0), 1.0, grid(2, 1e-3))
    np.testing.assert_allclose(tr.q, np.exp(-tr.t / 0.8), atol=1e-7)


def test_quintanilla_rate_vs_integral():
    p = FluxModelParams(kappa0=1, xi0=1, h0=0.5)
    r, i = rate_and_integral("quintanilla", p, signal_sine(), grid(2, 1e-3))
    assert max_gap(r, i) < 1e-5


def test_quintanilla_warns_when_inconsistent():
    p = FluxModelParams(kappa0=1, xi0=2, h0=1)
    with pytest.warns(ConsistencyWarning):
        simulate_quintanilla_integral(p, signal_constant(), grid(1, 1e-2))


# --- Burgers ----------------------------------------------------------------------

def test_burgers_steady_state():
    p = FluxModelParams(kappa0=1, xi0=2, h0=0.1, nu0=3)
    tr = simulate_burgers_rate(p, signal_constant(), 0.0, 0.0, grid(80, 1e-2))
    assert tr.q[-1] == pytest.approx(-0.1, rel=1e-6)


def test_burgers_mutual_oracle():
    p = FluxModelParams(kappa0=1, xi0=2, h0=0.1, nu0=3)
    r, i = rate_and_integral("burgers", p, signal_constant(), grid(5, 1e-3))
    assert max_gap(r, i) < 1e-4


def test_burgers_homogeneous():
    p = FluxModelParams(kappa0=1, xi0=2, h0=0.1, nu0=3)
    tr = simulate_burgers_integral(p, signal_constant(0.0), 1.0, grid(3, 1e-3))
    np.testing.assert_allclose(tr.q, np.exp(-tr.t / 2.0), atol=1e-7)


def test_burgers_compatible_rate():
    p = FluxModelParams(kappa0=1, xi0=2, h0=0.1, nu0=3)
    assert burgers_compatible_qdot(p, signal_constant(2.0), 1.0) == pytest.approx(-0.5 - 1.5 * 2.0)


# --- shared integrator properties ------------------------------------------------

SHAPES = [signal_constant(), signal_ramp(0.7, 0.2), signal_sine(1.0, 3.0),
          signal_decaying_exp(1.5, 2.0), signal_piecewise_constant([0.5, 1.25], [1.0, -0.5, 2.0])]


@pytest.mark.parametrize("quadrature", ["product", "trapezoid"])
@pytest.mark.parametrize("sig", SHAPES, ids=lambda s: s.description.split()[0])
def test_recurrence_matches_direct(sig, quadrature):
    t = grid(2, 1e-2)
    np.testing.assert_allclose(exp_convolution(t, sig, 0.6, True, quadrature),
                               exp_convolution(t, sig, 0.6, False, quadrature),
                               rtol=1e-11, atol=1e-13)


def test_product_rule_exact_for_linear_signal():
    # int_0^t e^{-(t-u)/tau} (c + d u) du in closed form
    tau, c, d, T = 0.2, 0.1, 0.8, 2.0
    t = grid(T, 0.1)
    got = exp_convolution(t, signal_ramp(d, c), tau)[-1]
    exact = (c - d * tau) * tau * (1 - math.exp(-T / tau)) + d * tau * T
    assert got == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("sig", SHAPES, ids=lambda s: s.description.split()[0])
def test_quadratures_share_limit(sig):
    tau = 0.25
    errs = {}
    for q in ("product", "trapezoid"):
        ref = exp_convolution(grid(2, 1e-4), sig, tau, True, "product")[-1]
        errs[q] = [abs(exp_convolution(grid(2, dt), sig, tau, False, q)[-1] - ref)
                   for dt in (2e-2, 1e-2)]
    for q in ("product", "trapezoid"):
        e0, e1 = errs[q]
        assert e1 < 1e-12 or e0 / e1 == pytest.approx(4, rel=0.1), q


def test_unknown_quadrature():
    with pytest.raises(ValueError, match="quadrature"):
        exp_convolution(grid(1, 0.1), signal_constant(), 1.0, quadrature="simpson")


@pytest.mark.parametrize("model", ["maxwell", "quintanilla", "burgers"])
@pytest.mark.parametrize("sig", SHAPES, ids=lambda s: s.description.split()[0])
def test_gap_is_second_order(model, sig):
    p = FluxModelParams(kappa0=1.2, xi0=0.6, h0=0.4, nu0=2.0)
    gaps = []
    for dt in (1e-2, 5e-3):
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConsistencyWarning)
            r, i = rate_and_integral(model, p, sig, grid(2, dt))
        gaps.append(max_gap(r, i))
    assert math.log2(gaps[0] / gaps[1]) >= 1.8


def test_max_gap_requires_same_grid():
    p = FluxModelParams()
    a = simulate_maxwell_rate(p, signal_constant(), 0.0, grid(1, 0.1))
    b = simulate_maxwell_rate(p, signal_constant(), 0.0, grid(1, 0.05))
    with pytest.raises(ValueError):
        max_gap(a, b)


def test_quintanilla_kernel_mass():
    p = FluxModelParams(kappa0=2, xi0=0.5, h0=1)
    mass, _ = integrate.quad(lambda s: float(quintanilla_kernel(p)(0.0, s)), 0, np.inf)
    assert mass == pytest.approx(1.5, rel=1e-10)
