"""Discrete energy ledger and a priori estimate checks.

The ledger tracks, per time step n,

    kinetic         (alpha0/2) |u_t|^2
    elastic         (1/2) K(t, t) |u_x|^2
    graffi_history  -(1/2) int_0^t K_s(t, s) |u_x(t) - u_x(t - s)|^2 ds
    source_work     int_0^t (F, u_t)
    damping         alpha1 int_0^t |u_t|^2
    rhs_bound       (1/2) K(0, 0) |u0_x|^2 + (alpha0/2) |u1|^2 + source_work

(all norms are discrete L2 norms on (0, 1)).  ``check_lemma31`` asserts
kinetic + elastic <= rhs_bound step by step; ``check_gronwall`` asserts the
exponential bounds that follow from it.

``kinetic_weight="unit"`` drops alpha0 from the kinetic term and from the
u1 term, for comparison against the unweighted statement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .kernels import AdmissibilityReport, AgingKernel, check_admissibility, kernel_derivative
from .pde_solver import (
    Discretization,
    ProblemSpec,
    SolutionTrajectory,
    forward_diff,
    history_weights,
    l2_norm2,
)

__all__ = [
    "EnergyLedger",
    "GronwallReport",
    "KernelDegeneracyError",
    "Lemma31Report",
    "LEDGER_COLUMNS",
    "ThermodynamicWarning",
    "audit_run_kernel",
    "check_gronwall",
    "check_lemma31",
    "graffi_pseudoenergy",
    "recompute_ledger",
]

LEDGER_COLUMNS = ("n", "t", "kinetic", "elastic", "graffi_history", "source_work",
                  "damping_dissipation", "rhs_bound", "lemma31_margin")


class ThermodynamicWarning(UserWarning):
    """The kernel derivative is positive somewhere on the sampled history."""


class KernelDegeneracyError(ValueError):
    """min K(t, t) <= 0 on the run's time grid."""


def graffi_pseudoenergy(u_now: float, gbar_history: Callable[[float], float],
                        kernel: AgingKernel, t: float = 0.0, alpha0: float = 1.0,
                        s_max: Optional[float] = None, tol: float = 1e-12) -> float:
    """alpha0 u^2 - (1/2) int_0^inf k'(s) |gbar(s)|^2 ds at one point.

    The integral is truncated at ``s_max``; by default the first power of two
    where |k'| has dropped below ``tol`` times its value at s = 0.
    """
    def dk(s):
        return float(kernel_derivative(kernel, "s", t, s))

    if s_max is None:
        ref = abs(dk(0.0)) or 1.0
        s_max = 1.0
        while abs(dk(s_max)) > tol * ref and s_max < 1e6:
            s_max *= 2.0
    probe = np.linspace(0.0, s_max, 257)
    if np.any(np.asarray(kernel_derivative(kernel, "s", t, probe)) > 0):
        warnings.warn("k'(s) > 0 on the sampled history: the pseudoenergy is not "
                      "thermodynamically admissible", ThermodynamicWarning, stacklevel=2)
    val, _ = integrate.quad(lambda s: dk(s) * float(gbar_history(s)) ** 2, 0.0, s_max,
                            limit=200, epsabs=1e-13, epsrel=1e-11)
    return alpha0 * float(u_now) ** 2 - 0.5 * val


@dataclass
class EnergyLedger:
    """Per-step energy functionals; rows must be appended in order."""

    problem: ProblemSpec
    disc: Discretization
    u1: np.ndarray
    kinetic_weight: str = "alpha0"
    columns: dict = field(default_factory=lambda: {c: [] for c in LEDGER_COLUMNS})

    def __post_init__(self):
        if self.kinetic_weight not in ("alpha0", "unit"):
            raise ValueError("kinetic_weight must be 'alpha0' or 'unit'")
        self.kernel = self.problem.effective_kernel
        self.mass = self.problem.alpha0 if self.kinetic_weight == "alpha0" else 1.0
        dx = self.disc.dx
        self._du = np.zeros((self.disc.nt + 1, self.disc.nx + 1))
        self._count = 0
        self._k00 = float(self.kernel.eval(0.0, 0.0))
        self._u1_2 = l2_norm2(np.asarray(self.u1, dtype=float), dx)
        self.ux2: list[float] = []
        self.ut2: list[float] = []
        self.ut2_int: list[float] = []
        self.f2_int: list[float] = []
        self.kdiag: list[float] = []
        self._power_prev = 0.0
        self._f2_prev = 0.0
        self._data0: Optional[float] = None
        self.final = False

    def update(self, n: int, U: np.ndarray, v_n: np.ndarray, F_n: np.ndarray,
               hw: np.ndarray) -> None:
        if self.final:
            raise RuntimeError("ledger already finalized")
        if n != self._count:
            raise ValueError(f"ledger rows must be appended in order (expected {self._count})")
        dx, dt = self.disc.dx, self.disc.dt
        t_n = n * dt
        du = forward_diff(U[n], dx)
        self._du[n] = du
        self._count += 1
        ux2 = float(dx * np.dot(du, du))
        ut2 = l2_norm2(v_n, dx)
        kd = float(self.kernel.diagonal(t_n))
        if n == 0:
            self._data0 = 0.5 * self._k00 * ux2 + 0.5 * self.mass * self._u1_2
            gh = 0.0
        else:
            diff = du - self._du[n::-1]
            gh = 0.0 - 0.5 * dx * float(hw @ np.einsum("ij,ij->i", diff, diff))
        power = float(dx * np.dot(F_n, v_n))
        f2 = float(dx * np.dot(F_n, F_n))
        if n == 0:
            sw, ut_int, f_int = 0.0, 0.0, 0.0
        else:
            sw = self.columns["source_work"][-1] + 0.5 * dt * (self._power_prev + power)
            ut_int = self.ut2_int[-1] + 0.5 * dt * (self.ut2[-1] + ut2)
            f_int = self.f2_int[-1] + 0.5 * dt * (self._f2_prev + f2)
        self._power_prev, self._f2_prev = power, f2
        kinetic = 0.5 * self.mass * ut2
        elastic = 0.5 * kd * ux2
        rhs = self._data0 + sw
        row = {
            "n": n, "t": t_n, "kinetic": kinetic, "elastic": elastic,
            "graffi_history": gh, "source_work": sw,
            "damping_dissipation": self.problem.alpha1 * ut_int,
            "rhs_bound": rhs, "lemma31_margin": rhs - (kinetic + elastic),
        }
        for k, v in row.items():
            self.columns[k].append(v)
        self.ux2.append(ux2)
        self.ut2.append(ut2)
        self.ut2_int.append(ut_int)
        self.f2_int.append(f_int)
        self.kdiag.append(kd)

    def finalize(self) -> "EnergyLedger":
        self.final = True
        self._du = None
        return self

    def __len__(self) -> int:
        return len(self.columns["n"])

    def __getitem__(self, name: str) -> np.ndarray:
        if name in self.columns:
            return np.asarray(self.columns[name])
        return np.asarray(getattr(self, name))

    @property
    def u0x2(self) -> float:
        return self.ux2[0]

    @property
    def u1_2(self) -> float:
        return self._u1_2

    def rows(self):
        for i in range(len(self)):
            yield {c: self.columns[c][i] for c in LEDGER_COLUMNS}


def recompute_ledger(traj: SolutionTrajectory, problem: ProblemSpec, disc: Discretization,
                     kinetic_weight: str = "alpha0") -> EnergyLedger:
    """Rebuild the ledger from a stored trajectory (same arithmetic as the solver)."""
    kernel = problem.effective_kernel
    x = disc.x_interior
    u1 = np.asarray(problem.u1(x), dtype=float) * np.ones(disc.nx)
    led = EnergyLedger(problem, disc, u1, kinetic_weight=kinetic_weight)
    for n in range(disc.nt + 1):
        t_n = n * disc.dt
        led.update(n, traj.u, traj.v[n], problem.source(x, t_n),
                   history_weights(kernel, t_n, n, disc.dt))
    return led.finalize()


def audit_run_kernel(problem: ProblemSpec, nt: int = 41, ns: int = 41,
                     tolerance: float = 1e-9) -> AdmissibilityReport:
    """Admissibility of the effective kernel on [0, T]^2."""
    return check_admissibility(problem.effective_kernel, (0.0, problem.T), (0.0, problem.T),
                               nt, ns, tolerance)


@dataclass
class Lemma31Report:
    passed: bool
    step_pass: np.ndarray
    worst_margin: float
    worst_step: int
    max_violation: float
    first_failure: Optional[int]
    tol_rel: float
    kernel_verdict: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "kernel_verdict": self.kernel_verdict,
            "steps_checked": int(len(self.step_pass)),
            "steps_failed": int(np.sum(~self.step_pass)),
            "first_failure": self.first_failure,
            "worst_margin": self.worst_margin,
            "worst_step": self.worst_step,
            "max_violation": self.max_violation,
            "tol_rel": self.tol_rel,
        }


def check_lemma31(ledger: EnergyLedger,
                  admissibility: Optional[AdmissibilityReport] = None) -> Lemma31Report:
    """kinetic + elastic <= rhs (1 + 10 dt) + 1e-12 (1 + |rhs|) at every step.

    ``max_violation`` is the raw excess max(0, lhs - rhs) without tolerance.
    """
    rhs = ledger["rhs_bound"]
    lhs = ledger["kinetic"] + ledger["elastic"]
    tol_rel = 10.0 * ledger.disc.dt
    ok = lhs <= rhs * (1.0 + tol_rel) + 1e-12 * (1.0 + np.abs(rhs))
    margin = ledger["lemma31_margin"]
    worst = int(np.argmin(margin)) if len(margin) else 0
    bad = np.nonzero(~ok)[0]
    return Lemma31Report(
        passed=bool(np.all(ok)),
        step_pass=ok,
        worst_margin=float(margin[worst]) if len(margin) else 0.0,
        worst_step=worst,
        max_violation=float(max(0.0, np.max(lhs - rhs))) if len(lhs) else 0.0,
        first_failure=int(bad[0]) if len(bad) else None,
        tol_rel=tol_rel,
        kernel_verdict=admissibility.verdict if admissibility is not None else None,
    )


@dataclass
class GronwallReport:
    passed: bool
    g0: float
    g1: float
    C: float
    rate: float
    worst_ratio: float
    damped: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "g0": self.g0, "g1": self.g1, "C": self.C,
                "rate": self.rate, "worst_ratio": self.worst_ratio, "damped": self.damped}


def check_gronwall(traj: SolutionTrajectory, ledger: EnergyLedger,
                   problem: ProblemSpec) -> GronwallReport:
    """|u_x|^2 + |u_t|^2 <= C e^{t/m} at every step, m the kinetic mass.

    With g0, g1 the min/max of K(t, t) and B = g1 |u0_x|^2 + m |u1|^2 + |F|^2_Q,
    C = B / min(g0, m).  For m = 1 this is the classical C e^t bound.  When
    alpha1 > 0 the accumulated int |u_t|^2 joins the left side and
    min(g0, m, 2 alpha1) replaces min(g0, m).  Tolerance factor 1 + 10 dt.
    """
    kd = ledger["kdiag"]
    g0, g1 = float(np.min(kd)), float(np.max(kd))
    if not g0 > 0:
        raise KernelDegeneracyError(f"min K(t, t) = {g0:.6g} <= 0 on the time grid")
    m = ledger.mass
    t = ledger["t"]
    tol = 1.0 + 10.0 * ledger.disc.dt
    B = g1 * ledger.u0x2 + m * ledger.u1_2 + ledger.f2_int[-1]
    growth = np.exp(t / m)
    energy = ledger["ux2"] + ledger["ut2"]
    C = B / min(g0, m)
    bound = C * growth
    ratio = np.where(bound > 0, energy / np.where(bound > 0, bound, 1.0),
                     np.where(energy > 0, np.inf, 0.0))
    passed = bool(np.all(energy <= bound * tol + 1e-300))
    damped = None
    if problem.alpha1 > 0:
        c2 = B / min(g0, m, 2.0 * problem.alpha1)
        e2 = energy + ledger["ut2_int"]
        b2 = c2 * growth
        ok2 = bool(np.all(e2 <= b2 * tol + 1e-300))
        damped = {"passed": ok2, "C": c2,
                  "worst_ratio": float(np.max(e2 / np.where(b2 > 0, b2, 1.0)))}
        passed = passed and ok2
    return GronwallReport(passed, g0, g1, C, 1.0 / m,
                          float(np.max(ratio)) if len(ratio) else 0.0, damped)
