import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from agingheat.kernels import (
    KernelEvaluationError,
    ParameterDomainError,
    check_admissibility,
    kernel_derivative,
    make_aging_exponential,
    make_classical_exponential,
    make_constant,
    make_linear_aging,
    make_rescaled,
    shifted,
)


def _inv1pt():
    return make_aging_exponential(lambda t: 1.0 / (1.0 + t), lambda t: -1.0 / (1.0 + t) ** 2)


# --- closed-form values ------------------------------------------------------

def test_classical_values():
    assert make_classical_exponential(1, 1)(5.0, 0.0) == 1.0
    assert make_classical_exponential(2, 0.5)(0.0, 0.5) == pytest.approx(4 * math.exp(-1), rel=1e-15)


@pytest.mark.parametrize("kappa0, xi0", [(1, -1), (0, 1), (1, 0)])
def test_classical_domain(kappa0, xi0):
    with pytest.raises(ParameterDomainError):
        make_classical_exponential(kappa0, xi0)


def test_aging_exponential_values():
    one = make_aging_exponential(lambda t: 1.0 + 0 * t, lambda t: 0 * t)
    assert one(np.array([0.0, 3.0, 7.0]), 0.0) == pytest.approx([1.0, 1.0, 1.0])
    assert _inv1pt()(1.0, 1.0) == pytest.approx(0.1353352832366127, rel=1e-14)


def test_aging_exponential_bad_eps():
    k = make_aging_exponential(lambda t: 1.0 - t, lambda t: -1.0 + 0 * t)
    with pytest.raises(KernelEvaluationError):
        k(2.0, 0.5)


def test_rescaled_identity_matches_classical():
    k = make_rescaled(lambda y: np.exp(-y), lambda t: 1.0 + 0 * t, lambda t: 0 * t,
                      lambda y: -np.exp(-y), lambda y: np.exp(-y))
    c = make_classical_exponential(1, 1)
    T, S = np.meshgrid(np.linspace(0, 3, 7), np.linspace(0, 5, 11))
    np.testing.assert_allclose(k(T, S), c(T, S), rtol=1e-15)


def test_rescaled_linear_aging_value():
    k = make_rescaled(lambda y: np.exp(-y), lambda t: 1.0 / t, lambda t: -1.0 / t**2)
    assert k(2.0, 1.0) == pytest.approx(0.2706705664732254, rel=1e-14)


def test_rescaled_mass_is_base_mass():
    k = make_rescaled(lambda y: np.exp(-y), lambda t: 1.0 / t, lambda t: -1.0 / t**2)
    val, _ = integrate.quad(lambda s: float(k(3.0, s)), 0, np.inf)
    assert val == pytest.approx(1.0, rel=1e-9)


def test_linear_aging_values():
    assert make_linear_aging(1)(2.0, 0.0) == 2.0
    assert make_linear_aging(1)(0.0, 123.0) == 0.0
    assert make_linear_aging(2)(2.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    with pytest.raises(ParameterDomainError):
        make_linear_aging(0)


# --- derivatives ---------------------------------------------------------------

def test_derivative_examples():
    c = make_classical_exponential(1, 1)
    assert kernel_derivative(c, "s", 4.2, 0.0) == -1.0
    assert np.all(kernel_derivative(c, "t", np.array([0.0, 1.0]), np.array([0.0, 2.0])) == 0.0)
    # K_ts = e^{-st/a} (t/a^2)(-2 + st/a): -2 at (1, 0) with a = 1; K_ts + K_ss = -1
    la = make_linear_aging(1)
    assert kernel_derivative(la, "ts", 1.0, 0.0) == pytest.approx(-2.0, abs=1e-14)
    assert (kernel_derivative(la, "ts", 1.0, 0.0)
            + kernel_derivative(la, "ss", 1.0, 0.0)) == pytest.approx(-1.0, abs=1e-14)


KERNELS = {
    "classical": lambda: make_classical_exponential(2.0, 0.7),
    "aging": _inv1pt,
    "linear": lambda: make_linear_aging(1.3),
    "rescaled": lambda: make_rescaled(lambda y: 1 / (1 + y) ** 2, lambda t: 1 / (1 + t),
                                      lambda t: -1 / (1 + t) ** 2,
                                      lambda y: -2 / (1 + y) ** 3, lambda y: 6 / (1 + y) ** 4),
}


def _strip(k):
    """Same kernel with every analytic derivative removed."""
    from dataclasses import replace
    return replace(k, eval_ds=None, eval_dt=None, eval_dss=None, eval_dts=None,
                   time_independent=False)


@pytest.mark.parametrize("name", sorted(KERNELS))
@pytest.mark.parametrize("which", ["s", "t", "ss", "ts"])
def test_fallback_agrees_with_analytic(name, which):
    k = KERNELS[name]()
    bare = _strip(k)
    T, S = np.meshgrid(np.linspace(0.5, 3, 6), np.array([0.0, 0.3, 1.0, 2.5]))
    exact = kernel_derivative(k, which, T, S)
    approx = kernel_derivative(bare, which, T, S)
    # second-order stencils, one-sided at s = 0 where the third derivative peaks
    tol = 2e-5 if len(which) == 1 else 2e-3
    np.testing.assert_allclose(approx, exact, rtol=tol, atol=tol * (1 + np.max(np.abs(exact))))


def test_shifted_kernel():
    k = make_linear_aging(1.0)
    ks = shifted(k, 1.5)
    assert ks(0.5, 0.2) == k(2.0, 0.2)
    assert kernel_derivative(ks, "ts", 0.0, 0.0) == kernel_derivative(k, "ts", 1.5, 0.0)


# --- admissibility ---------------------------------------------------------------

def test_classical_admissible_with_note():
    rep = check_admissibility(make_classical_exponential(1, 1), (0, 5), (0, 10))
    assert rep.verdict == "admissible"
    assert any("reduce" in n for n in rep.notes)
    d = rep.to_dict()
    assert {c["condition"] for c in d["conditions"]} == {
        "K>0", "K_s<=0", "K_ss>=0", "K_t+K_s<=0", "K_ts+K_ss>=0"}


def test_aging_inverse_admissible():
    assert check_admissibility(_inv1pt(), (0, 2), (0, 2)).admissible


def test_linear_aging_threshold_both_sides():
    assert check_admissibility(make_linear_aging(1), (1.5, 3), (0, 5)).admissible
    rep = check_admissibility(make_linear_aging(1), (1.0, 1.3), (0, 5))
    assert rep.verdict == "violated"
    c = rep.condition("K_ts+K_ss>=0")
    assert c.argmin == (1.0, 0.0)
    # analytic margin (t/a^2)(t^2/a - 2) at t = 1
    assert c.min_margin == pytest.approx(-1.0, abs=1e-12)


def test_positive_slope_kernel_violated():
    k = make_rescaled(lambda y: np.exp(y), lambda t: 2.0 + 0 * t, lambda t: 0 * t,
                      lambda y: np.exp(y), lambda y: np.exp(y))
    rep = check_admissibility(k, (0, 1), (0, 1))
    assert rep.verdict == "violated"
    assert rep.condition("K_s<=0").violations


def test_constant_kernel_is_admissible():
    assert check_admissibility(make_constant(3.0), (0, 1), (0, 1)).admissible


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.2, 4.0), frac=st.floats(0.05, 0.999))
def test_threshold_flip_property(alpha, frac):
    """Below sqrt(2 alpha) the s = 0 margin is negative, at or above it nonnegative."""
    th = math.sqrt(2 * alpha)
    below = check_admissibility(make_linear_aging(alpha), (frac * th, frac * th), (0, 1), 2, 11)
    above = check_admissibility(make_linear_aging(alpha), (th * (1 + 1e-6), 2 * th), (0, 1), 5, 11)
    assert below.verdict == "violated"
    assert below.condition("K_ts+K_ss>=0").argmin[1] == 0.0
    assert above.admissible


@settings(max_examples=40, deadline=None)
@given(kappa0=st.floats(0.1, 10), xi0=st.floats(0.1, 10))
def test_classical_always_admissible(kappa0, xi0):
    k = make_classical_exponential(kappa0, xi0)
    assert check_admissibility(k, (0, 1), (0, 5 * xi0), 3, 21).admissible
