"""Explicit solver for the 1D temperature equation with aging memory.

Solves, on (0, 1) x (0, T] with homogeneous Dirichlet data,

    alpha0 u_tt + alpha1 u_t = K(t, 0) u_xx + int_0^t K_s(t, s) u_xx(t - s) ds + F

by the central scheme

    alpha0 (u+ - 2u + u-)/dt^2 + alpha1 (u+ - u-)/(2 dt) = K(t_n, 0) L u^n + Q_n + F^n

where L is the three-point Laplacian and Q_n is the trapezoid sum of the
history integral over every stored step.  Work is O(Nt^2 Nx) overall.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .kernels import AgingKernel, kernel_derivative, shifted

__all__ = [
    "BlowUpError",
    "CFLError",
    "Discretization",
    "ManufacturedSolution",
    "ProblemSpec",
    "SolutionTrajectory",
    "SourceAssemblyError",
    "convergence_study",
    "h1_seminorm2",
    "l2_norm2",
    "laplacian_apply",
    "manufactured_problem",
    "solve",
    "step",
]


class CFLError(ValueError):
    pass


class BlowUpError(RuntimeError):
    pass


class SourceAssemblyError(RuntimeError):
    pass


XFn = Callable[[np.ndarray], np.ndarray]
XTFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """Initial-boundary-value problem data.

    ``t_offset`` feeds ``t + t_offset`` to the kernel's age argument while
    the history convolution spans only the run's own past.
    """

    kernel: AgingKernel
    u0: XFn
    u1: XFn
    F: Optional[XTFn]
    T: float
    alpha0: float = 1.0
    alpha1: float = 0.0
    t_offset: float = 0.0

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 > 0 required")
        if not self.alpha1 >= 0:
            raise ValueError("alpha1 >= 0 required")
        if not self.T > 0:
            raise ValueError("T > 0 required")
        ends = np.asarray(self.u0(np.array([0.0, 1.0])), dtype=float)
        if np.max(np.abs(ends)) > 1e-12:
            raise ValueError("u0 must vanish at x = 0 and x = 1")

    @property
    def effective_kernel(self) -> AgingKernel:
        return shifted(self.kernel, self.t_offset)

    def source(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.F is None:
            return np.zeros_like(x)
        return np.asarray(self.F(x, t), dtype=float) * np.ones_like(x)


@dataclass(frozen=True)
class Discretization:
    nx: int
    nt: int
    T: float
    c_cfl: float = 0.9
    quadrature: str = "trapezoid"
    history_window: Optional[float] = None
    cfl_margin: float = float("nan")

    @property
    def dx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def x(self) -> np.ndarray:
        """Full grid including both boundary nodes."""
        return np.linspace(0.0, 1.0, self.nx + 2)

    @property
    def x_interior(self) -> np.ndarray:
        return self.x[1:-1]

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @classmethod
    def for_problem(cls, problem: ProblemSpec, nx: int, nt: int, c_cfl: float = 0.9,
                    history_window: Optional[float] = None) -> "Discretization":
        """Build a grid and enforce dt <= c_cfl dx sqrt(alpha0 / K_max)."""
        if nx < 1 or nt < 1:
            raise ValueError("nx >= 1 and nt >= 1 required")
        dx = 1.0 / (nx + 1)
        dt = problem.T / nt
        tg = dt * np.arange(nt + 1)
        kmax = float(np.max(problem.effective_kernel.initial_value(tg)))
        if not kmax > 0:
            raise CFLError("K(t, 0) must be positive somewhere on the time grid")
        limit = c_cfl * dx * math.sqrt(problem.alpha0 / kmax)
        if dt > limit:
            raise CFLError(
                f"CFL violated: dt = {dt:.6g} > {limit:.6g} = c_cfl*dx*sqrt(alpha0/K_max) "
                f"(K_max = {kmax:.6g}); raise nt to at least "
                f"{math.ceil(problem.T / limit)}")
        return cls(nx, nt, problem.T, c_cfl, "trapezoid", history_window, cfl_margin=limit / dt)


@dataclass
class SolutionTrajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray          # (nt + 1, nx) interior values
    v: np.ndarray          # (nt + 1, nx) discrete rate
    meta: dict = field(default_factory=dict)
    ledger: object = None

    @property
    def u_full(self) -> np.ndarray:
        out = np.zeros((self.u.shape[0], self.u.shape[1] + 2))
        out[:, 1:-1] = self.u
        return out


def laplacian_apply(u: np.ndarray, dx: float) -> np.ndarray:
    """(u_{i-1} - 2 u_i + u_{i+1}) / dx^2 with zero ghost values."""
    u = np.asarray(u, dtype=float)
    out = -2.0 * u
    out[..., 1:] += u[..., :-1]
    out[..., :-1] += u[..., 1:]
    return out / (dx * dx)


def forward_diff(u: np.ndarray, dx: float) -> np.ndarray:
    """u_x on the nx + 1 cells, boundary zeros included."""
    u = np.asarray(u, dtype=float)
    pad = np.zeros(u.shape[:-1] + (u.shape[-1] + 2,))
    pad[..., 1:-1] = u
    return np.diff(pad, axis=-1) / dx


def l2_norm2(u: np.ndarray, dx: float) -> float:
    return float(dx * np.dot(u, u))


def h1_seminorm2(u: np.ndarray, dx: float) -> float:
    d = forward_diff(u, dx)
    return float(dx * np.dot(d, d))


def trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n + 1, dt)
    if n == 0:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * dt
    return w


def history_weights(kernel: AgingKernel, t_n: float, n: int, dt: float,
                    window: Optional[float] = None) -> np.ndarray:
    """w_j K_s(t_n, s_j), j = 0..n, trapezoid in s."""
    s = dt * np.arange(n + 1)
    ks = np.asarray(kernel_derivative(kernel, "s", np.full(n + 1, t_n), s), dtype=float)
    w = trapezoid_weights(n, dt) * ks
    if window is not None:
        w[s > window] = 0.0
    return w


def step(u_hist: np.ndarray, lu_hist: np.ndarray, problem: ProblemSpec,
         disc: Discretization, n: int, kernel: Optional[AgingKernel] = None,
         f_n: Optional[np.ndarray] = None, hw: Optional[np.ndarray] = None) -> np.ndarray:
    """u^{n+1} from the stored u^0..u^n and their Laplacians.

    ``kernel`` is the effective (offset) kernel; ``f_n`` and ``hw`` may be
    passed pre-computed.
    """
    if n < 1:
        raise ValueError("step needs n >= 1; use the bootstrap for u^1")
    kernel = kernel or problem.effective_kernel
    dt, a0, a1 = disc.dt, problem.alpha0, problem.alpha1
    t_n = n * dt
    if hw is None:
        hw = history_weights(kernel, t_n, n, dt, disc.history_window)
    if f_n is None:
        f_n = problem.source(disc.x_interior, t_n)
    k0 = float(kernel.initial_value(np.array(t_n)))
    q_n = hw @ lu_hist[n::-1]
    rhs = k0 * lu_hist[n] + q_n + f_n
    u, um = u_hist[n], u_hist[n - 1]
    lhs = a0 / dt**2 + a1 / (2 * dt)
    return (rhs + a0 * (2 * u - um) / dt**2 + a1 * um / (2 * dt)) / lhs


def bootstrap(problem: ProblemSpec, disc: Discretization, u0, u1, lu0, f0,
              kernel: AgingKernel) -> np.ndarray:
    dt, a0 = disc.dt, problem.alpha0
    k00 = float(kernel.initial_value(np.array(0.0)))
    return u0 + dt * u1 + dt**2 / (2 * a0) * (k00 * lu0 + f0 - problem.alpha1 * u1)


def discrete_rate(u: np.ndarray, n: int, dt: float, u1: np.ndarray) -> np.ndarray:
    """Central rate at interior steps; the data u1 at n = 0; one-sided at the end."""
    last = u.shape[0] - 1
    if n == 0:
        return np.array(u1, dtype=float)
    if n < last:
        return (u[n + 1] - u[n - 1]) / (2 * dt)
    if n >= 2:
        return (3 * u[n] - 4 * u[n - 1] + u[n - 2]) / (2 * dt)
    return (u[n] - u[n - 1]) / dt


def solve(problem: ProblemSpec, disc: Discretization, ledger: bool = True,
          kinetic_weight: str = "alpha0") -> SolutionTrajectory:
    """March the scheme to T, filling the energy ledger as it goes."""
    from .energy_monitor import EnergyLedger

    start = _time.perf_counter()
    kernel = problem.effective_kernel
    x = disc.x_interior
    nx, nt, dt, dx = disc.nx, disc.nt, disc.dt, disc.dx
    U = np.zeros((nt + 1, nx))
    LU = np.zeros((nt + 1, nx))
    V = np.zeros((nt + 1, nx))
    U[0] = np.asarray(problem.u0(x), dtype=float) * np.ones(nx)
    u1 = np.asarray(problem.u1(x), dtype=float) * np.ones(nx)
    LU[0] = laplacian_apply(U[0], dx)
    F = [problem.source(x, 0.0)]
    U[1] = bootstrap(problem, disc, U[0], u1, LU[0], F[0], kernel)
    _check_finite(U[1], 1)
    LU[1] = laplacian_apply(U[1], dx)
    led = EnergyLedger(problem, disc, u1, kinetic_weight=kinetic_weight) if ledger else None
    V[0] = discrete_rate(U, 0, dt, u1)
    if led is not None:
        led.update(0, U, V[0], F[0], history_weights(kernel, 0.0, 0, dt))
    for n in range(1, nt):
        t_n = n * dt
        hw = history_weights(kernel, t_n, n, dt, disc.history_window)
        F.append(problem.source(x, t_n))
        U[n + 1] = step(U, LU, problem, disc, n, kernel, F[n], hw)
        _check_finite(U[n + 1], n + 1)
        LU[n + 1] = laplacian_apply(U[n + 1], dx)
        V[n] = discrete_rate(U, n, dt, u1)
        if led is not None:
            if disc.history_window is not None:
                hw = history_weights(kernel, t_n, n, dt)
            led.update(n, U, V[n], F[n], hw)
    F.append(problem.source(x, nt * dt))
    V[nt] = discrete_rate(U, nt, dt, u1)
    if led is not None:
        led.update(nt, U, V[nt], F[nt], history_weights(kernel, nt * dt, nt, dt))
    elapsed = _time.perf_counter() - start
    meta = {
        "nx": nx, "nt": nt, "dx": dx, "dt": dt, "T": disc.T,
        "cfl_margin": disc.cfl_margin, "kernel": kernel.name,
        "kernel_params": {k: v for k, v in kernel.params.items() if _plain(v)},
        "alpha0": problem.alpha0, "alpha1": problem.alpha1, "t_offset": problem.t_offset,
        "wall_time_s": elapsed,
        "final_l2_norm2": l2_norm2(U[-1], dx),
        "final_h1_seminorm2": h1_seminorm2(U[-1], dx),
    }
    if disc.history_window is not None:
        meta["history_window"] = disc.history_window
        meta["history_tail_bound"] = _tail_bound(kernel, disc, LU)
    traj = SolutionTrajectory(disc.t, disc.x, U, V, meta)
    if led is not None:
        traj.ledger = led.finalize()
    return traj


def _plain(v) -> bool:
    return isinstance(v, (int, float, str, bool)) or v is None


def _tail_bound(kernel, disc, LU) -> float:
    """Bound on the dropped history: sup|L u| * max_t int_window^t |K_s| ds."""
    worst = 0.0
    dt = disc.dt
    for n in range(disc.nt + 1):
        t_n = n * dt
        if t_n <= disc.history_window:
            continue
        w = np.abs(history_weights(kernel, t_n, n, dt, None))
        s = dt * np.arange(n + 1)
        worst = max(worst, float(np.sum(w[s > disc.history_window])))
    return worst * float(np.max(np.abs(LU)))


def _check_finite(u, n):
    if not np.all(np.isfinite(u)) or np.max(np.abs(u), initial=0.0) > 1e150:
        raise BlowUpError(
            f"non-finite solution at step {n}; the explicit scheme is unstable here, "
            "reduce dt (raise nt) or lower c_cfl")


# --- manufactured solutions -----------------------------------------------


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution u(x, t) with the derivatives the residual needs."""

    u: XTFn
    u_t: XTFn
    u_tt: XTFn
    u_xx: XTFn


def manufactured_problem(exact: ManufacturedSolution, kernel: AgingKernel,
                         alpha0: float = 1.0, alpha1: float = 0.0, T: float = 1.0,
                         t_offset: float = 0.0, epsabs: float = 1e-12,
                         epsrel: float = 1e-10) -> ProblemSpec:
    """Problem whose exact solution is ``exact``.

    F is the residual of the equation at u = exact; its history integral is
    evaluated by adaptive quadrature, vectorized over x, and cached per t.
    """
    keff = shifted(kernel, t_offset)
    cache: dict[tuple[float, bytes], np.ndarray] = {}

    def F(x, t):
        x = np.asarray(x, dtype=float)
        t = float(t)
        key = (t, x.tobytes())
        if key in cache:
            return cache[key]
        k0 = float(keff.initial_value(np.array(t)))
        base = (alpha0 * np.asarray(exact.u_tt(x, t), dtype=float)
                + alpha1 * np.asarray(exact.u_t(x, t), dtype=float)
                - k0 * np.asarray(exact.u_xx(x, t), dtype=float))
        if t > 0:
            def integrand(s):
                ks = float(kernel_derivative(keff, "s", t, s))
                return ks * np.asarray(exact.u_xx(x, t - s), dtype=float) * np.ones_like(x)

            res, err, info = integrate.quad_vec(integrand, 0.0, t, epsabs=epsabs,
                                                epsrel=epsrel, full_output=True)
            if not info.success:
                raise SourceAssemblyError(
                    f"history quadrature did not converge at t = {t} (error {err:.3g})")
            base = base - res
        out = base * np.ones_like(x)
        cache[key] = out
        return out

    return ProblemSpec(kernel, lambda x: exact.u(x, 0.0), lambda x: exact.u_t(x, 0.0), F, T,
                       alpha0, alpha1, t_offset)


# --- refinement -----------------------------------------------------------


@dataclass
class ConvergenceRow:
    nx: int
    nt: int
    dx: float
    dt: float
    l2_error: float
    order: Optional[float]

    def to_dict(self) -> dict:
        return {"nx": self.nx, "nt": self.nt, "dx": self.dx, "dt": self.dt,
                "l2_error": self.l2_error,
                "order": self.order if self.order is not None else "n/a"}


def convergence_study(problem: ProblemSpec, exact: XTFn,
                      levels: Sequence[tuple[int, int]], c_cfl: float = 0.9,
                      floor: float = 1e-12) -> list[ConvergenceRow]:
    """L2 errors at T over nested levels and pairwise observed orders.

    order_k = log(e_{k-1}/e_k) / log(dx_{k-1}/dx_k); reported as None when
    either error sits below ``floor``.
    """
    if len(levels) < 3:
        raise ValueError("convergence_study needs at least 3 levels")
    rows: list[ConvergenceRow] = []
    for nx, nt in levels:
        disc = Discretization.for_problem(problem, nx, nt, c_cfl)
        traj = solve(problem, disc, ledger=False)
        x = disc.x_interior
        err = math.sqrt(l2_norm2(traj.u[-1] - np.asarray(exact(x, problem.T)) * np.ones(nx),
                                 disc.dx))
        order = None
        if rows:
            prev = rows[-1]
            if prev.l2_error > floor and err > floor:
                order = math.log(prev.l2_error / err) / math.log(prev.dx / disc.dx)
        rows.append(ConvergenceRow(nx, nt, disc.dx, disc.dt, err, order))
    return rows
