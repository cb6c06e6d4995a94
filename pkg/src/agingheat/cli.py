"""Command line entry point.

Exit status: 0 success, 1 error (bad config, CFL, blow-up), 2 a check
failed.  A manifest is written to the output directory in every case where
the directory can be created.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    build_exact,
    build_flux_params,
    build_kernel,
    build_problem,
    build_signal,
    config_echo,
    parse_config,
)
from .energy_monitor import KernelDegeneracyError, audit_run_kernel, check_gronwall, check_lemma31
from .flux_models import (
    ConsistencyWarning,
    FactorizationError,
    consistency_report,
    max_gap,
    rate_and_integral,
)
from .kernels import KernelEvaluationError, ParameterDomainError, check_admissibility
from .outputs import write_csv, write_flux, write_json, write_ledger, write_manifest, write_trajectory
from .pde_solver import (
    BlowUpError,
    CFLError,
    Discretization,
    SourceAssemblyError,
    convergence_study,
    manufactured_problem,
    solve,
)

OK, ERROR, CHECK_FAILED = 0, 1, 2

_ERRORS = (ConfigError, CFLError, BlowUpError, SourceAssemblyError, ParameterDomainError,
           KernelEvaluationError, FactorizationError, ValueError)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


class _Run:
    """Collects files and report fragments for one subcommand."""

    def __init__(self, command: str, out: Path):
        self.command = command
        self.out = out
        self.files: list[Path] = []
        self.extra: dict = {}
        self.echo: Optional[dict] = None
        self.start = time.perf_counter()

    def add(self, path: Path) -> None:
        self.files.append(path)

    def finish(self, status: int, error: Optional[str] = None) -> int:
        if error is not None:
            self.extra["error"] = error
            _say(f"error: {error}")
        self.out.mkdir(parents=True, exist_ok=True)
        write_manifest(self.out, self.command, self.echo, self.files, status,
                       timing={"wall_time_s": time.perf_counter() - self.start},
                       deterministic=True, **self.extra)
        return status


def _fmt(cfg: RunConfig, args) -> str:
    return args.format or cfg.output.format


def kernel_check(cfg: RunConfig, run: _Run, fmt: str) -> int:
    kc = cfg.kernel_check
    kernel = build_kernel(cfg.kernel)
    rep = check_admissibility(kernel, kc.t_range, kc.s_range, kc.nt, kc.ns, kc.tolerance)
    run.add(write_json(run.out / "admissibility.json", rep.to_dict()))
    run.extra["admissibility"] = {"verdict": rep.verdict, "kernel": kernel.name}
    print(f"{kernel.name}: {rep.verdict} on the sampled grid")
    for c in rep.conditions:
        print(f"  {c.name:14s} min margin {c.min_margin: .6g} at (t, s) = "
              f"({c.argmin[0]:.6g}, {c.argmin[1]:.6g})  violations {len(c.violations)}")
    return OK if rep.admissible else CHECK_FAILED


def run_simulation(cfg: RunConfig, run: _Run, fmt: str) -> int:
    problem = build_problem(cfg)
    g = cfg.grid
    disc = Discretization.for_problem(problem, g.nx, g.nt, g.c_cfl, g.history_window)
    ck = cfg.checks
    adm = audit_run_kernel(problem, ck.admissibility_nt, ck.admissibility_ns, ck.tolerance)
    run.extra["admissibility"] = {
        "verdict": adm.verdict, "kernel": adm.kernel_name,
        "allow_inadmissible": ck.allow_inadmissible,
        "failed_conditions": [c.name for c in adm.conditions if c.violations],
    }
    if adm.verdict == "violated" and not ck.allow_inadmissible:
        _say(f"kernel {adm.kernel_name} violates the sign conditions on [0, T]^2; "
             "pass --allow-inadmissible to run anyway")
        return CHECK_FAILED
    traj = solve(problem, disc, ledger=True, kinetic_weight=cfg.output.kinetic_weight)
    led = traj.ledger
    lemma = check_lemma31(led, adm)
    try:
        gron = check_gronwall(traj, led, problem).to_dict()
    except KernelDegeneracyError as exc:
        gron = {"passed": False, "error": str(exc)}
    run.add(write_trajectory(run.out, traj, cfg.output.stride, fmt))
    run.add(write_ledger(run.out, led, fmt))
    run.add(write_json(run.out / "checks.json", {
        "lemma": lemma.to_dict(), "gronwall": gron, "admissibility": adm.to_dict()}))
    run.extra["run"] = traj.meta
    run.extra["checks"] = {"lemma": lemma.passed, "gronwall": gron["passed"]}
    print(f"energy estimate {'PASS' if lemma.passed else 'FAIL'} "
          f"(worst margin {lemma.worst_margin:.6g} at step {lemma.worst_step}); "
          f"gronwall {'PASS' if gron['passed'] else 'FAIL'}")
    return OK if lemma.passed and gron["passed"] else CHECK_FAILED


def _ladder(T: float, dt: float) -> np.ndarray:
    n = int(round(T / dt))
    if n < 1 or not math.isclose(n * dt, T, rel_tol=1e-9):
        raise ValueError(f"dt = {dt:g} does not divide T = {T:g}")
    return np.linspace(0.0, T, n + 1)


def flux_compare(cfg: RunConfig, run: _Run, fmt: str) -> int:
    fc = cfg.flux
    params = build_flux_params(fc)
    signal = build_signal(fc)
    cons = consistency_report(params)
    run.extra["consistency_report"] = cons
    rows = []
    for k, dt in enumerate(fc.dts):
        t = _ladder(fc.T, dt)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConsistencyWarning)
            rate, integ = rate_and_integral(fc.model, params, signal, t, fc.q_init,
                                            fc.recurrence, fc.quadrature)
        gap = max_gap(rate, integ)
        order = None
        if rows and rows[-1]["gap"] > 1e-14 and gap > 1e-14:
            order = math.log(rows[-1]["gap"] / gap) / math.log(rows[-1]["dt"] / dt)
        rows.append({"dt": dt, "gap": gap, "order": order if order is not None else "n/a"})
        run.add(write_flux(run.out / f"flux_{k}_rate", rate, fmt))
        run.add(write_flux(run.out / f"flux_{k}_integral", integ, fmt))
    finest = rows[-1]["gap"]
    passed = finest <= fc.tolerance
    run.add(write_json(run.out / "flux_report.json", {
        "model": fc.model, "params": params.to_dict(), "signal": fc.signal,
        "quadrature": fc.quadrature, "recurrence": fc.recurrence,
        "consistency_report": cons, "levels": rows, "finest_gap": finest,
        "tolerance": fc.tolerance, "passed": passed}))
    for r in rows:
        o = r["order"]
        print(f"dt {r['dt']:.6g}  max gap {r['gap']:.6e}  order "
              f"{o if isinstance(o, str) else format(o, '.3f')}")
    return OK if passed else CHECK_FAILED


def convergence(cfg: RunConfig, run: _Run, fmt: str) -> int:
    cc = cfg.convergence
    kernel = build_kernel(cfg.kernel)
    exact = build_exact(cc.exact)
    pc = cfg.problem
    if cc.manufacture_source:
        problem = manufactured_problem(exact, kernel, pc.alpha0, pc.alpha1, pc.T, pc.t_offset)
    else:
        problem = build_problem(cfg, kernel)
    rows = convergence_study(problem, exact.u, [tuple(lv) for lv in cc.levels], cfg.grid.c_cfl)
    lo, hi = cc.order_range
    orders = [r.order for r in rows if r.order is not None]
    passed = bool(orders) and all(lo <= o <= hi for o in orders)
    table = [r.to_dict() for r in rows]
    if fmt == "csv":
        run.add(write_csv(run.out / "convergence.csv", ("nx", "nt", "dx", "dt", "l2_error"),
                          ((r.nx, r.nt, r.dx, r.dt, r.l2_error) for r in rows)))
    run.add(write_json(run.out / "convergence.json", {
        "exact": cc.exact, "kernel": kernel.name, "levels": table,
        "order_range": [lo, hi], "passed": passed}))
    for r in table:
        o = r["order"]
        print(f"nx {r['nx']:5d} nt {r['nt']:6d}  L2 error {r['l2_error']:.6e}  order "
              f"{o if isinstance(o, str) else format(o, '.3f')}")
    return OK if passed else CHECK_FAILED


COMMANDS = {
    "run": run_simulation,
    "kernel-check": kernel_check,
    "flux-compare": flux_compare,
    "convergence": convergence,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agingheat",
                                description="Heat conduction with aging memory kernels.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="YAML configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        sp.add_argument("--format", choices=("csv", "json"), help="output format")
        sp.add_argument("--allow-inadmissible", action="store_true",
                        help="run even if the kernel fails the sign conditions")
        sp.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                        help="reject unknown config keys (default on)")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or Path("out")
    run = _Run(args.command, out)
    try:
        cfg = parse_config(args.config, strict=args.strict) if args.config else RunConfig()
    except ConfigError as exc:
        return run.finish(ERROR, str(exc))
    if args.out is None:
        run.out = Path(cfg.output.dir)
    if args.allow_inadmissible:
        cfg = cfg.model_copy(update={
            "checks": cfg.checks.model_copy(update={"allow_inadmissible": True})})
    run.echo = config_echo(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    try:
        status = COMMANDS[args.command](cfg, run, _fmt(cfg, args))
    except _ERRORS as exc:
        return run.finish(ERROR, f"{type(exc).__name__}: {exc}")
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
