"""Rate-type and integral forms of the heat-flux constitutive laws.

Each model comes in two forms that solve the same initial-value problem
under a prescribed scalar gradient signal g(t):

* Maxwell-Cattaneo:   xi0 q' + q = -kappa0 g
* Quintanilla:        xi0 q' + q = -h0 a - kappa0 g,     a(t) = int_0^t g
* Burgers-type:       xi0 q'' + nu0 q' + q = -h0 g - nu0 kappa0 g'

Histories are null before t = 0.  Rate forms are integrated by Heun's
method; integral forms evaluate their convolutions by the trapezoid rule on
the same grid, so both are second order and their gap closes as dt^2.

Signals may jump at declared breakpoints.  On every grid interval the
integrators use the one-sided limits of g at its end points, so a jump that
sits on a grid node costs no accuracy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import make_classical_exponential

__all__ = [
    "ConsistencyWarning",
    "FactorizationError",
    "FluxModelParams",
    "FluxTrajectory",
    "GradientSignal",
    "consistency_report",
    "decompose_burgers",
    "max_gap",
    "maxwell_kernel",
    "quintanilla_kernel",
    "simulate_burgers_integral",
    "simulate_burgers_rate",
    "simulate_maxwell_integral",
    "simulate_maxwell_rate",
    "simulate_quintanilla_integral",
    "simulate_quintanilla_rate",
    "signal_constant",
    "signal_decaying_exp",
    "signal_piecewise_constant",
    "signal_ramp",
    "signal_sine",
    "SIMULATORS",
]


class FactorizationError(ValueError):
    """nu0^2 < 4 xi0: the Burgers operator has no real factorization."""


class ConsistencyWarning(UserWarning):
    pass


def decompose_burgers(nu0: float, xi0: float) -> tuple[float, float]:
    """Roots mu1 <= mu2 of mu^2 - nu0 mu + xi0 = 0."""
    if nu0 <= 0 or xi0 <= 0:
        raise ValueError("nu0 > 0 and xi0 > 0 required")
    disc = nu0 * nu0 - 4.0 * xi0
    # a double root may land a few ulps below zero
    if disc < -8.0 * np.finfo(float).eps * nu0 * nu0:
        raise FactorizationError(
            f"nu0^2 - 4 xi0 = {disc:.6g} < 0: no real factorization")
    root = math.sqrt(max(disc, 0.0))
    mu2 = 0.5 * (nu0 + root)
    # product form avoids cancellation in the small root
    mu1 = min(xi0 / mu2, mu2)
    return mu1, mu2


@dataclass(frozen=True)
class FluxModelParams:
    kappa0: float = 1.0
    xi0: float = 1.0
    h0: float = 0.0
    nu0: Optional[float] = None
    alpha0: float = 1.0
    alpha1: Optional[float] = None

    @property
    def mu(self) -> tuple[float, float]:
        if self.nu0 is None:
            raise ValueError("nu0 is required for the Burgers factorization")
        return decompose_burgers(self.nu0, self.xi0)

    @property
    def damping(self) -> float:
        """alpha1; for the Burgers model this defaults to alpha0 / mu2."""
        if self.alpha1 is not None:
            return self.alpha1
        if self.nu0 is None:
            return 0.0
        return self.alpha0 / self.mu[1]

    def to_dict(self) -> dict:
        out = {"kappa0": self.kappa0, "xi0": self.xi0, "h0": self.h0,
               "nu0": self.nu0, "alpha0": self.alpha0, "alpha1": self.alpha1}
        if self.nu0 is not None:
            try:
                out["mu1"], out["mu2"] = self.mu
            except FactorizationError:
                out["mu1"] = out["mu2"] = None
        return out


def consistency_report(params: FluxModelParams) -> dict:
    """Each consistency inequality with its margin; never raises."""
    k, xi, h = params.kappa0, params.xi0, params.h0
    rep: dict[str, dict] = {}
    rep["quintanilla: kappa0 > xi0*h0"] = {"holds": k - xi * h > 0, "margin": k - xi * h}
    rep["td_consistency: h0 > 0"] = {"holds": h > 0, "margin": h}
    if params.nu0 is not None:
        nu = params.nu0
        m2 = nu * nu * k - xi * h
        rep["td_consistency: nu0^2*kappa0 - xi0*h0 >= 0"] = {"holds": m2 >= 0, "margin": m2}
        try:
            mu1, mu2 = decompose_burgers(nu, xi)
        except (FactorizationError, ValueError) as exc:
            rep["burgers_factorization"] = {"holds": False, "margin": nu * nu - 4 * xi,
                                            "error": str(exc)}
        else:
            rep["burgers_factorization"] = {"holds": True, "margin": nu * nu - 4 * xi,
                                            "mu1": mu1, "mu2": mu2,
                                            "ordering": "mu1 is the smaller root"}
            w = nu * k - mu1 * h
            rep["burgers_weight: nu0*kappa0 - mu1*h0 > 0"] = {"holds": w > 0, "margin": w}
            strong = m2 - mu1 * mu1 * h
            rep["burgers_strong: nu0^2*kappa0 - xi0*h0 > mu1^2*h0"] = {
                "holds": strong > 0, "margin": strong}
    return rep


# --- signals ---------------------------------------------------------------


@dataclass(frozen=True)
class GradientSignal:
    """Scalar temperature-gradient history g(t), right-continuous.

    ``g_left`` gives left limits at the ``breakpoints``; without it g is
    taken as continuous.
    """

    g: Callable[[np.ndarray], np.ndarray]
    dg: Optional[Callable[[np.ndarray], np.ndarray]] = None
    description: str = ""
    breakpoints: tuple[float, ...] = ()
    g_left: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def values(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(right limits, left limits) of g on the grid."""
        t = np.asarray(t, dtype=float)
        right = np.asarray(self.g(t), dtype=float) * np.ones_like(t)
        if self.g_left is None:
            return right, right
        return right, np.asarray(self.g_left(t), dtype=float) * np.ones_like(t)

    def derivative(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.dg is not None:
            return np.asarray(self.dg(t), dtype=float) * np.ones_like(t)
        h = 1e-6 * (1.0 + np.abs(t))
        return (np.asarray(self.g(t + h)) - np.asarray(self.g(np.maximum(t - h, 0.0)))) / (
            t + h - np.maximum(t - h, 0.0))

    def accumulated(self, t: np.ndarray) -> np.ndarray:
        """Trapezoid running integral a(t) = int_0^t g on the grid."""
        t = np.asarray(t, dtype=float)
        gr, gl = self.values(t)
        out = np.zeros_like(t)
        out[1:] = np.cumsum(0.5 * np.diff(t) * (gr[:-1] + gl[1:]))
        return out


def signal_constant(c: float = 1.0) -> GradientSignal:
    return GradientSignal(lambda t: c + 0.0 * np.asarray(t), lambda t: 0.0 * np.asarray(t),
                          f"constant {c}")


def signal_ramp(slope: float = 1.0, offset: float = 0.0) -> GradientSignal:
    return GradientSignal(lambda t: offset + slope * np.asarray(t),
                          lambda t: slope + 0.0 * np.asarray(t), f"ramp {offset}+{slope}t")


def signal_sine(amplitude: float = 1.0, omega: float = 2.0, phase: float = 0.0) -> GradientSignal:
    return GradientSignal(lambda t: amplitude * np.sin(omega * np.asarray(t) + phase),
                          lambda t: amplitude * omega * np.cos(omega * np.asarray(t) + phase),
                          f"sine {amplitude} sin({omega}t+{phase})")


def signal_decaying_exp(amplitude: float = 1.0, rate: float = 1.0) -> GradientSignal:
    return GradientSignal(lambda t: amplitude * np.exp(-rate * np.asarray(t)),
                          lambda t: -rate * amplitude * np.exp(-rate * np.asarray(t)),
                          f"decaying exp {amplitude} e^(-{rate}t)")


def signal_piecewise_constant(times: Sequence[float], levels: Sequence[float]) -> GradientSignal:
    """g = levels[i] on [times[i-1], times[i]), with times[-1] = 0 implied."""
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if len(levels) != len(times) + 1:
        raise ValueError("need len(levels) == len(times) + 1")

    def g(t):
        return levels[np.searchsorted(times, np.asarray(t, dtype=float), side="right")]

    def g_left(t):
        return levels[np.searchsorted(times, np.asarray(t, dtype=float), side="left")]

    return GradientSignal(g, lambda t: 0.0 * np.asarray(t), "piecewise constant",
                          tuple(float(x) for x in times), g_left)


# --- trajectories ----------------------------------------------------------


@dataclass
class FluxTrajectory:
    t: np.ndarray
    q: np.ndarray
    qdot: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) != len(self.q):
            raise ValueError("time grid and q must have equal length")


def max_gap(a: FluxTrajectory, b: FluxTrajectory) -> float:
    if not np.array_equal(a.t, b.t):
        raise ValueError("trajectories live on different grids")
    return float(np.max(np.abs(a.q - b.q)))


def _grid(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValueError("time grid must be a 1-D array")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _jump_nodes(signal: GradientSignal, t: np.ndarray) -> np.ndarray:
    gr, gl = signal.values(t)
    return gr - gl


def _heun_linear(t, q0: float, decay: float, forcing_r, forcing_l) -> np.ndarray:
    """Heun for q' = -decay q + f(t), f given by one-sided node values."""
    n = len(t)
    q = [0.0] * n
    q[0] = float(q0)
    h = np.diff(t).tolist()
    fr = forcing_r.tolist()
    fl = forcing_l.tolist()
    for i in range(n - 1):
        k1 = -decay * q[i] + fr[i]
        pred = q[i] + h[i] * k1
        k2 = -decay * pred + fl[i + 1]
        q[i + 1] = q[i] + 0.5 * h[i] * (k1 + k2)
    return np.array(q)


def _slice_weights(h: np.ndarray, tau: float, quadrature: str) -> tuple:
    """Weights (on g_n^+, on g_{n+1}^-) of one step of the convolution."""
    decay = np.exp(-h / tau)
    if quadrature == "trapezoid":
        return 0.5 * h * decay, 0.5 * h, decay
    if quadrature == "product":
        # exp(-(h - v)/tau) integrated exactly against the linear interpolant of g
        z = h / tau
        mass = -tau * np.expm1(-z)
        right = tau - mass / z
        return mass - right, right, decay
    raise ValueError(f"unknown quadrature {quadrature!r}")


def exp_convolution(t, signal: GradientSignal, tau: float, recurrence: bool = False,
                    quadrature: str = "product") -> np.ndarray:
    """I(t_n) = int_0^{t_n} exp(-(t_n - u)/tau) g(u) du on the grid.

    ``product`` (default) integrates the exponential exactly against the
    piecewise-linear interpolant of g; ``trapezoid`` is the plain composite
    rule.  Both are second order, but the product rule's error does not grow
    with 1/tau.  The direct sum costs O(N^2); with ``recurrence`` the exact
    one-step update I_{n+1} = e^{-h/tau} I_n + (new slice) gives the same
    quadrature in O(N).
    """
    t = _grid(t)
    gr, gl = signal.values(t)
    n = len(t)
    out = np.zeros(n)
    if n == 1:
        return out
    h = np.diff(t)
    a, b, decay = _slice_weights(h, tau, quadrature)
    wr = a * gr[:-1]
    wl = b * gl[1:]
    if recurrence:
        acc = 0.0
        for i in range(n - 1):
            acc = decay[i] * acc + wr[i] + wl[i]
            out[i + 1] = acc
        return out
    for i in range(1, n):
        e = np.exp(-(t[i] - t[1: i + 1]) / tau)
        out[i] = e @ (wr[:i] + wl[:i])
    return out


def maxwell_kernel(params: FluxModelParams):
    """Convolution kernel of the integral Maxwell form."""
    return make_classical_exponential(params.kappa0, params.xi0)


def quintanilla_kernel(params: FluxModelParams):
    """Convolution kernel of the integral Quintanilla form (conductivity kappa0 - xi0 h0)."""
    return make_classical_exponential(params.kappa0 - params.xi0 * params.h0, params.xi0)


def simulate_maxwell_rate(params: FluxModelParams, signal: GradientSignal,
                          q_init: float, t) -> FluxTrajectory:
    t = _grid(t)
    gr, gl = signal.values(t)
    xi, k = params.xi0, params.kappa0
    q = _heun_linear(t, q_init, 1.0 / xi, -k / xi * gr, -k / xi * gl)
    return FluxTrajectory(t, q, meta={"model": "maxwell", "form": "rate",
                                      "params": params.to_dict()})


def simulate_maxwell_integral(params: FluxModelParams, signal: GradientSignal, t,
                              recurrence: bool = False,
                              quadrature: str = "product") -> FluxTrajectory:
    t = _grid(t)
    conv = exp_convolution(t, signal, params.xi0, recurrence, quadrature)
    q = -params.kappa0 / params.xi0 * conv
    return FluxTrajectory(t, q, meta={"model": "maxwell", "form": "integral",
                                      "params": params.to_dict()})


def simulate_quintanilla_rate(params: FluxModelParams, signal: GradientSignal,
                              q_init: float, t) -> FluxTrajectory:
    """Co-integrates a' = g and xi0 q' + q = -h0 a - kappa0 g."""
    t = _grid(t)
    gr, gl = signal.values(t)
    xi, k, h0 = params.xi0, params.kappa0, params.h0
    n = len(t)
    hs = np.diff(t).tolist()
    grl, gll = gr.tolist(), gl.tolist()
    q = [0.0] * n
    a = [0.0] * n
    q[0] = float(q_init)
    for i in range(n - 1):
        h = hs[i]
        k1q = (-q[i] - h0 * a[i] - k * grl[i]) / xi
        k1a = grl[i]
        qp = q[i] + h * k1q
        ap = a[i] + h * k1a
        k2q = (-qp - h0 * ap - k * gll[i + 1]) / xi
        k2a = gll[i + 1]
        q[i + 1] = q[i] + 0.5 * h * (k1q + k2q)
        a[i + 1] = a[i] + 0.5 * h * (k1a + k2a)
    return FluxTrajectory(t, np.array(q), meta={"model": "quintanilla", "form": "rate",
                                                "params": params.to_dict()})


def simulate_quintanilla_integral(params: FluxModelParams, signal: GradientSignal, t,
                                  recurrence: bool = False,
                              quadrature: str = "product") -> FluxTrajectory:
    """q = -h0 a(t) - ((kappa0 - xi0 h0)/xi0) int_0^t exp(-(t-u)/xi0) g(u) du."""
    t = _grid(t)
    xi, k, h0 = params.xi0, params.kappa0, params.h0
    if not k > xi * h0:
        warnings.warn(f"kappa0 > xi0*h0 violated (margin {k - xi * h0:.6g})",
                      ConsistencyWarning, stacklevel=2)
    a = signal.accumulated(t)
    conv = exp_convolution(t, signal, xi, recurrence, quadrature)
    q = -h0 * a - (k - xi * h0) / xi * conv
    return FluxTrajectory(t, q, meta={"model": "quintanilla", "form": "integral",
                                      "params": params.to_dict()})


def burgers_compatible_qdot(params: FluxModelParams, signal: GradientSignal,
                            q_init: float) -> float:
    """Initial rate q'(0) consistent with the integral form at t = 0."""
    mu1, mu2 = params.mu
    g0 = float(signal.values(np.array([0.0]))[0][0])
    return -q_init / mu2 - params.nu0 * params.kappa0 / params.xi0 * g0


def simulate_burgers_rate(params: FluxModelParams, signal: GradientSignal,
                          q_init: float, qdot_init: float, t) -> FluxTrajectory:
    """Heun on the first-order system (q, p = q').

    A jump of size dg in g at a grid node kicks p by -nu0 kappa0 dg / xi0,
    the impulse carried by the g' term.
    """
    if params.nu0 is None:
        raise ValueError("nu0 is required for the Burgers model")
    t = _grid(t)
    gr, gl = signal.values(t)
    dg = signal.derivative(t).tolist()
    if signal.breakpoints:
        # g' on an interval is the smooth part; the jumps are added as kicks
        kick = (-params.nu0 * params.kappa0 / params.xi0 * _jump_nodes(signal, t)).tolist()
    else:
        kick = [0.0] * len(t)
    xi, nu, k, h0 = params.xi0, params.nu0, params.kappa0, params.h0
    n = len(t)
    hs = np.diff(t).tolist()
    grl, gll = gr.tolist(), gl.tolist()
    q = [0.0] * n
    p = [0.0] * n
    q[0] = float(q_init)
    p[0] = float(qdot_init)
    for i in range(n - 1):
        h = hs[i]
        pi = p[i] + (kick[i] if i > 0 else 0.0)
        k1q = pi
        k1p = (-h0 * grl[i] - nu * k * dg[i] - nu * pi - q[i]) / xi
        qp = q[i] + h * k1q
        pp = pi + h * k1p
        k2q = pp
        k2p = (-h0 * gll[i + 1] - nu * k * dg[i + 1] - nu * pp - qp) / xi
        q[i + 1] = q[i] + 0.5 * h * (k1q + k2q)
        p[i + 1] = pi + 0.5 * h * (k1p + k2p)
    return FluxTrajectory(t, np.array(q), np.array(p),
                          meta={"model": "burgers", "form": "rate", "params": params.to_dict()})


def simulate_burgers_integral(params: FluxModelParams, signal: GradientSignal,
                              q_init: float, t, recurrence: bool = False,
                              quadrature: str = "product") -> FluxTrajectory:
    """q' + q/mu2 = -(nu0 kappa0/xi0) g + w int_0^t exp(-(t-u)/mu1) g(u) du.

    w = (nu0 kappa0 - mu1 h0)/(mu1 xi0); mu1 is the smaller factorization root.
    """
    if params.nu0 is None:
        raise ValueError("nu0 is required for the Burgers model")
    t = _grid(t)
    mu1, mu2 = params.mu
    xi, nu, k, h0 = params.xi0, params.nu0, params.kappa0, params.h0
    w = (nu * k - mu1 * h0) / (mu1 * xi)
    gr, gl = signal.values(t)
    conv = exp_convolution(t, signal, mu1, recurrence, quadrature)
    fr = -nu * k / xi * gr + w * conv
    fl = -nu * k / xi * gl + w * conv
    q = _heun_linear(t, q_init, 1.0 / mu2, fr, fl)
    qdot = -q / mu2 + fr
    return FluxTrajectory(t, q, qdot, meta={"model": "burgers", "form": "integral",
                                            "params": params.to_dict(),
                                            "mu1": mu1, "mu2": mu2, "kernel_weight": w})


SIMULATORS = {
    "maxwell": (simulate_maxwell_rate, simulate_maxwell_integral),
    "quintanilla": (simulate_quintanilla_rate, simulate_quintanilla_integral),
    "burgers": (simulate_burgers_rate, simulate_burgers_integral),
}


def rate_and_integral(model: str, params: FluxModelParams, signal: GradientSignal,
                      t, q_init: float = 0.0, recurrence: bool = False,
                      quadrature: str = "product"):
    """Run both forms of ``model`` from the same initial-value problem."""
    if model == "maxwell":
        if q_init != 0.0:
            raise ValueError("the integral Maxwell form assumes q(0) = 0")
        return (simulate_maxwell_rate(params, signal, 0.0, t),
                simulate_maxwell_integral(params, signal, t, recurrence, quadrature))
    if model == "quintanilla":
        if q_init != 0.0:
            raise ValueError("the integral Quintanilla form assumes q(0) = 0")
        return (simulate_quintanilla_rate(params, signal, 0.0, t),
                simulate_quintanilla_integral(params, signal, t, recurrence, quadrature))
    if model == "burgers":
        qd = burgers_compatible_qdot(params, signal, q_init)
        return (simulate_burgers_rate(params, signal, q_init, qd, t),
                simulate_burgers_integral(params, signal, q_init, t, recurrence, quadrature))
    raise ValueError(f"unknown model {model!r}")
