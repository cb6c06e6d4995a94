"""Aging relaxation kernels K(t, s) and their admissibility audit.

A kernel is a function of the current time ``t`` and the elapsed time ``s``.
Classical (non-aging) kernels do not depend on ``t`` at all.  Every callable
here accepts numpy arrays and broadcasts.

The audit samples the five sign conditions

    K > 0,  K_s <= 0,  K_ss >= 0,  K_t + K_s <= 0,  K_ts + K_ss >= 0

on a tensor grid.  A passing audit means "admissible on the sampled grid",
nothing more.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

__all__ = [
    "AgingKernel",
    "AdmissibilityReport",
    "ConditionResult",
    "KernelEvaluationError",
    "ParameterDomainError",
    "check_admissibility",
    "kernel_derivative",
    "make_aging_exponential",
    "make_classical_exponential",
    "make_constant",
    "make_linear_aging",
    "make_rescaled",
    "shifted",
    "CONDITIONS",
]

Fn2 = Callable[[np.ndarray, np.ndarray], np.ndarray]
Fn1 = Callable[[np.ndarray], np.ndarray]


class ParameterDomainError(ValueError):
    """A kernel parameter is outside its admissible range."""


class KernelEvaluationError(ValueError):
    """A kernel could not be evaluated at the requested point."""


def _zero(t, s):
    return np.zeros(np.broadcast(np.asarray(t, float), np.asarray(s, float)).shape)


@dataclass(frozen=True)
class AgingKernel:
    """Two-time relaxation kernel with optional analytic derivatives.

    ``eval_ds``, ``eval_dt``, ``eval_dss`` and ``eval_dts`` are K_s, K_t,
    K_ss and K_ts.  Missing handles fall back to finite differences through
    :func:`kernel_derivative`.
    """

    name: str
    eval: Fn2
    eval_ds: Optional[Fn2] = None
    eval_dt: Optional[Fn2] = None
    eval_dss: Optional[Fn2] = None
    eval_dts: Optional[Fn2] = None
    params: Mapping[str, object] = field(default_factory=dict)
    time_independent: bool = False

    def __call__(self, t, s):
        return self.eval(t, s)

    def initial_value(self, t):
        """K_0(t) = K(t, 0)."""
        return self.eval(t, np.zeros_like(np.asarray(t, dtype=float)))

    def diagonal(self, t):
        """K(t, t), the kernel weight on the full history length."""
        return self.eval(t, t)

    def derivative(self, which: str, t, s):
        return kernel_derivative(self, which, t, s)

    def has_analytic(self, which: str) -> bool:
        return getattr(self, _HANDLE[which]) is not None


_HANDLE = {"s": "eval_ds", "t": "eval_dt", "ss": "eval_dss", "ts": "eval_dts"}


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ParameterDomainError(f"{name} > 0 required, got {value}")
    return value


def make_classical_exponential(kappa0: float, xi0: float) -> AgingKernel:
    """k(s) = (kappa0/xi0) exp(-s/xi0), independent of t."""
    kappa0 = _positive("kappa0", kappa0)
    xi0 = _positive("xi0", xi0)
    amp = kappa0 / xi0

    def k(t, s):
        s = np.asarray(s, dtype=float)
        return amp * np.exp(-s / xi0) + _zero(t, s)

    return AgingKernel(
        name="classical_exp",
        eval=k,
        eval_ds=lambda t, s: -k(t, s) / xi0,
        eval_dss=lambda t, s: k(t, s) / xi0**2,
        eval_dt=_zero,
        eval_dts=_zero,
        params={"kappa0": kappa0, "xi0": xi0},
        time_independent=True,
    )


def make_constant(k0: float) -> AgingKernel:
    """Kernel K(t, s) = k0 with K_s = 0: the pure wave-equation limit.

    Not a relaxation function (it does not vanish as s grows); it exists to
    exercise the solver against the linear wave equation.
    """
    k0 = _positive("k0", k0)
    return AgingKernel(
        name="constant",
        eval=lambda t, s: k0 + _zero(t, s),
        eval_ds=_zero,
        eval_dss=_zero,
        eval_dt=_zero,
        eval_dts=_zero,
        params={"k0": k0},
        time_independent=True,
    )


def _eps_checked(eps: Fn1) -> Fn1:
    def wrapped(t):
        val = np.asarray(eps(np.asarray(t, dtype=float)), dtype=float)
        if np.any(~np.isfinite(val)) or np.any(val <= 0):
            raise KernelEvaluationError(
                "relaxation time eps(t) must be finite and > 0 at every queried t"
            )
        return val

    return wrapped


def make_aging_exponential(eps: Fn1, deps: Fn1, name: str = "aging_exp",
                           params: Mapping[str, object] | None = None) -> AgingKernel:
    """K(t, s) = exp(-s/eps(t)), with eps and its derivative supplied by the caller."""
    e = _eps_checked(eps)

    def de(t):
        return np.asarray(deps(np.asarray(t, dtype=float)), dtype=float)

    def k(t, s):
        return np.exp(-np.asarray(s, dtype=float) / e(t))

    def k_s(t, s):
        return -k(t, s) / e(t)

    def k_ss(t, s):
        return k(t, s) / e(t) ** 2

    def k_t(t, s):
        ev = e(t)
        return np.asarray(s, dtype=float) * de(t) / ev**2 * k(t, s)

    def k_ts(t, s):
        ev = e(t)
        return k(t, s) * de(t) / ev**2 * (1.0 - np.asarray(s, dtype=float) / ev)

    return AgingKernel(name, k, k_s, k_t, k_ss, k_ts, dict(params or {}))


def make_rescaled(base: Fn1, eps: Fn1, deps: Fn1,
                  base_d1: Fn1 | None = None, base_d2: Fn1 | None = None,
                  name: str = "rescaled",
                  params: Mapping[str, object] | None = None) -> AgingKernel:
    """K(t, s) = base(s/eps(t)) / eps(t).

    The s-integral of K(t, .) equals the integral of ``base`` for every t.
    Without ``base_d1``/``base_d2`` the corresponding derivatives of K are
    left to the finite-difference fallback.
    """
    e = _eps_checked(eps)

    def de(t):
        return np.asarray(deps(np.asarray(t, dtype=float)), dtype=float)

    def k(t, s):
        ev = e(t)
        return np.asarray(base(np.asarray(s, dtype=float) / ev), dtype=float) / ev

    k_s = k_ss = k_t = k_ts = None
    if base_d1 is not None:
        def k_s(t, s):
            ev = e(t)
            return np.asarray(base_d1(np.asarray(s, dtype=float) / ev), dtype=float) / ev**2

        def k_t(t, s):
            ev = e(t)
            y = np.asarray(s, dtype=float) / ev
            return -de(t) / ev**2 * (np.asarray(base(y), dtype=float)
                                     + y * np.asarray(base_d1(y), dtype=float))

    if base_d2 is not None:
        def k_ss(t, s):
            ev = e(t)
            return np.asarray(base_d2(np.asarray(s, dtype=float) / ev), dtype=float) / ev**3

    if base_d1 is not None and base_d2 is not None:
        def k_ts(t, s):
            ev = e(t)
            y = np.asarray(s, dtype=float) / ev
            return -de(t) / ev**3 * (2.0 * np.asarray(base_d1(y), dtype=float)
                                     + y * np.asarray(base_d2(y), dtype=float))

    return AgingKernel(name, k, k_s, k_t, k_ss, k_ts, dict(params or {}))


def make_linear_aging(alpha: float) -> AgingKernel:
    """K(t, s) = (t/alpha) exp(-s t/alpha): base e^{-y} rescaled with eps = alpha/t.

    Satisfies all five sign conditions only for t >= sqrt(2 alpha).
    """
    alpha = _positive("alpha", alpha)

    def ex(t, s):
        return np.exp(-np.asarray(s, dtype=float) * np.asarray(t, dtype=float) / alpha)

    def k(t, s):
        return np.asarray(t, dtype=float) / alpha * ex(t, s)

    def k_s(t, s):
        return -((np.asarray(t, dtype=float) / alpha) ** 2) * ex(t, s)

    def k_ss(t, s):
        return (np.asarray(t, dtype=float) / alpha) ** 3 * ex(t, s)

    def k_t(t, s):
        st = np.asarray(s, dtype=float) * np.asarray(t, dtype=float) / alpha
        return (1.0 - st) / alpha * ex(t, s)

    def k_ts(t, s):
        t = np.asarray(t, dtype=float)
        st = np.asarray(s, dtype=float) * t / alpha
        return t / alpha**2 * (st - 2.0) * ex(t, s)

    return AgingKernel("linear_aging", k, k_s, k_t, k_ss, k_ts, {"alpha": alpha})


def shifted(kernel: AgingKernel, offset: float) -> AgingKernel:
    """Kernel with its age argument advanced: (t, s) -> K(t + offset, s)."""
    offset = float(offset)
    if offset == 0.0:
        return kernel

    def wrap(fn):
        if fn is None:
            return None
        return lambda t, s: fn(np.asarray(t, dtype=float) + offset, s)

    params = dict(kernel.params)
    params["t_offset"] = offset
    return AgingKernel(
        name=kernel.name,
        eval=wrap(kernel.eval),
        eval_ds=wrap(kernel.eval_ds),
        eval_dt=wrap(kernel.eval_dt),
        eval_dss=wrap(kernel.eval_dss),
        eval_dts=wrap(kernel.eval_dts),
        params=params,
        time_independent=kernel.time_independent,
    )


# --- finite-difference fallback -------------------------------------------


def fd_step(t, s):
    return np.maximum(1e-6, 1e-4 * (1.0 + np.abs(t) + np.abs(s)))


def fd_step2(t, s):
    return 1e-2 * np.sqrt(fd_step(t, s))


def _d1(f, x, h):
    # central where x - h >= 0, second-order forward otherwise
    central = (f(x + h) - f(x - h)) / (2 * h)
    forward = (-3 * f(x) + 4 * f(x + h) - f(x + 2 * h)) / (2 * h)
    return np.where(x - h >= 0, central, forward)


def _d2(f, x, h):
    central = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
    forward = (2 * f(x) - 5 * f(x + h) + 4 * f(x + 2 * h) - f(x + 3 * h)) / h**2
    return np.where(x - h >= 0, central, forward)


def kernel_derivative(kernel: AgingKernel, which: str, t, s):
    """K_s, K_t, K_ss or K_ts at (t, s), analytic if attached.

    The fallback uses central differences, switching to one-sided stencils
    where the stencil would cross s = 0 or t = 0.
    """
    if which not in _HANDLE:
        raise ValueError(f"which must be one of {sorted(_HANDLE)}, got {which!r}")
    handle = getattr(kernel, _HANDLE[which])
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if handle is not None:
        return handle(t, s)
    if kernel.time_independent and which in ("t", "ts"):
        return np.zeros(t.shape)
    f = kernel.eval
    if which == "s":
        return _d1(lambda x: f(t, x), s, fd_step(t, s))
    if which == "t":
        return _d1(lambda x: f(x, s), t, fd_step(t, s))
    h2 = fd_step2(t, s)
    if which == "ss":
        if kernel.eval_ds is not None:
            return _d1(lambda x: kernel.eval_ds(t, x), s, fd_step(t, s))
        return _d2(lambda x: f(t, x), s, h2)
    # ts: d/dt of K_s
    if kernel.eval_ds is not None:
        return _d1(lambda x: kernel.eval_ds(x, s), t, fd_step(t, s))
    return _d1(lambda x: _d1(lambda y: f(x, y), s, h2), t, h2)


# --- admissibility audit ---------------------------------------------------

CONDITIONS = ("K>0", "K_s<=0", "K_ss>=0", "K_t+K_s<=0", "K_ts+K_ss>=0")

# relative noise floor of the finite-difference fallback
_FD_NOISE = {"s": 1e-7, "t": 1e-7, "ss": 1e-5, "ts": 1e-5}


@dataclass
class ConditionResult:
    name: str
    min_margin: float
    argmin: tuple[float, float]
    violations: list[tuple[float, float]]
    used_fallback: bool

    def to_dict(self) -> dict:
        return {
            "condition": self.name,
            "min_margin": self.min_margin,
            "argmin": list(self.argmin),
            "n_violations": len(self.violations),
            "violations": [list(p) for p in self.violations[:50]],
            "used_fallback": self.used_fallback,
        }


@dataclass
class AdmissibilityReport:
    kernel_name: str
    t_grid: np.ndarray
    s_grid: np.ndarray
    tolerance: np.ndarray
    conditions: list[ConditionResult]
    verdict: str
    notes: list[str] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.verdict == "admissible"

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel_name,
            "t_range": [float(self.t_grid[0]), float(self.t_grid[-1])],
            "s_range": [float(self.s_grid[0]), float(self.s_grid[-1])],
            "grid": [len(self.t_grid), len(self.s_grid)],
            "verdict": self.verdict,
            "scope": "sampled grid only",
            "conditions": [c.to_dict() for c in self.conditions],
            "notes": list(self.notes),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def check_admissibility(kernel: AgingKernel, t_range, s_range,
                        nt: int = 41, ns: int = 101,
                        tolerance: float = 1e-9) -> AdmissibilityReport:
    """Sample the five sign conditions on a tensor grid.

    The s-grid always contains s = 0.  A margin passes when it is at least
    ``-tolerance * (1 + |K(t, 0)|)``; positivity of K is strict.
    """
    t0, t1 = (float(v) for v in t_range)
    s0, s1 = (float(v) for v in s_range)
    if t1 < t0 or s1 < s0:
        raise ValueError("ranges must be nonempty (lo <= hi)")
    if nt < 2 or ns < 2:
        raise ValueError("grid sizes must be >= 2")
    if s0 < 0:
        raise ValueError("elapsed time s must be >= 0")
    t_grid = np.linspace(t0, t1, nt)
    s_grid = np.linspace(s0, s1, ns)
    if s_grid[0] != 0.0:
        s_grid = np.concatenate(([0.0], s_grid))
    T, S = np.meshgrid(t_grid, s_grid, indexing="ij")

    K = np.asarray(kernel.eval(T, S), dtype=float)
    K0 = np.asarray(kernel.initial_value(t_grid), dtype=float)
    tol = tolerance * (1.0 + np.abs(K0))[:, None] * np.ones_like(K)
    d = {w: np.asarray(kernel_derivative(kernel, w, T, S), dtype=float) for w in _HANDLE}
    fallback = {w: not kernel.has_analytic(w) and not (kernel.time_independent and w in ("t", "ts"))
                for w in _HANDLE}

    margins = {
        "K>0": (K, ()),
        "K_s<=0": (-d["s"], ("s",)),
        "K_ss>=0": (d["ss"], ("ss",)),
        "K_t+K_s<=0": (-(d["t"] + d["s"]), ("t", "s")),
        "K_ts+K_ss>=0": (d["ts"] + d["ss"], ("ts", "ss")),
    }
    scale = np.maximum(np.abs(K), np.abs(K0)[:, None]) + 1.0
    results = []
    verdict = "admissible"
    for name in CONDITIONS:
        m, deps_ = margins[name]
        m = np.where(np.isfinite(m), m, -np.inf)
        bad = (m <= 0) if name == "K>0" else (m < -tol)
        idx = np.unravel_index(int(np.argmin(m)), m.shape)
        used_fb = any(fallback[w] for w in deps_)
        viol = [(float(T[i, j]), float(S[i, j])) for i, j in zip(*np.nonzero(bad))]
        results.append(ConditionResult(name, float(m[idx]),
                                       (float(T[idx]), float(S[idx])), viol, used_fb))
        if viol:
            noise = max(_FD_NOISE[w] for w in deps_) * scale if used_fb else 0.0
            genuine = bad & (m < -tol - noise)
            if np.any(genuine):
                verdict = "violated"
            elif verdict == "admissible":
                verdict = "inconclusive"

    notes = []
    if kernel.time_independent:
        notes.append("t-independent kernel: the aging conditions reduce to the classical ones")
    return AdmissibilityReport(kernel.name, t_grid, s_grid, tol, results, verdict, notes)
