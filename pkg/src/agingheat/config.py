"""Run configuration: YAML text validated into pydantic models.

Unknown keys are rejected in strict mode (the default) with a nearest-key
suggestion; with ``strict=False`` they are dropped with a warning.  Every
default is materialized, so ``emit_config(cfg)`` reproduces the full
configuration and parses back to an equal object.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .expressions import ExpressionError, parse_expression
from .flux_models import FluxModelParams, GradientSignal
from .kernels import (
    AgingKernel,
    make_aging_exponential,
    make_classical_exponential,
    make_constant,
    make_linear_aging,
    make_rescaled,
)
from .pde_solver import ManufacturedSolution, ProblemSpec

__all__ = [
    "ConfigError",
    "RunConfig",
    "build_exact",
    "build_kernel",
    "build_problem",
    "build_signal",
    "emit_config",
    "load_config_text",
    "parse_config",
]


class ConfigError(ValueError):
    pass


def _expr_validator(variables):
    def check(v):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = repr(float(v))
        try:
            parse_expression(v, variables)
        except ExpressionError as exc:
            raise ValueError(str(exc)) from None
        return v
    return check


class _Section(BaseModel):
    model_config = ConfigDict(extra="ignore", validate_default=True)


class ClassicalExpKernel(_Section):
    family: Literal["classical_exp"] = "classical_exp"
    kappa0: float = Field(1.0, gt=0)
    xi0: float = Field(1.0, gt=0)


class AgingExpKernel(_Section):
    family: Literal["aging_exp"] = "aging_exp"
    eps: str = "1/(1+t)"
    deps: Optional[str] = None

    @field_validator("eps", "deps", mode="before")
    @classmethod
    def _expr(cls, v):
        return None if v is None else _expr_validator(("t",))(v)


class RescaledKernel(_Section):
    family: Literal["rescaled"] = "rescaled"
    base: str = "exp(-y)"
    eps: str = "1"
    deps: Optional[str] = None

    @field_validator("base", mode="before")
    @classmethod
    def _base_expr(cls, v):
        return _expr_validator(("y",))(v)

    @field_validator("eps", "deps", mode="before")
    @classmethod
    def _expr(cls, v):
        return None if v is None else _expr_validator(("t",))(v)


class LinearAgingKernel(_Section):
    family: Literal["linear_aging"] = "linear_aging"
    alpha: float = Field(1.0, gt=0)


class ConstantKernel(_Section):
    family: Literal["constant"] = "constant"
    k0: float = Field(1.0, gt=0)


KernelConfig = Annotated[
    Union[ClassicalExpKernel, AgingExpKernel, RescaledKernel, LinearAgingKernel, ConstantKernel],
    Field(discriminator="family"),
]
KERNEL_MODELS = {m.model_fields["family"].default: m for m in
                 (ClassicalExpKernel, AgingExpKernel, RescaledKernel, LinearAgingKernel,
                  ConstantKernel)}


class ProblemConfig(_Section):
    alpha0: float = Field(1.0, gt=0)
    alpha1: float = Field(0.0, ge=0)
    u0: str = "sin(pi*x)"
    u1: str = "0"
    F: str = "0"
    T: float = Field(1.0, gt=0)
    t_offset: float = Field(0.0, ge=0)

    @field_validator("u0", "u1", "F", mode="before")
    @classmethod
    def _expr(cls, v):
        return _expr_validator(("x", "t"))(v)


class GridConfig(_Section):
    nx: int = Field(100, ge=1)
    nt: int = Field(1000, ge=1)
    c_cfl: float = Field(0.9, gt=0, le=1)
    history_window: Optional[float] = Field(None, gt=0)


class OutputConfig(_Section):
    dir: str = "out"
    stride: int = Field(10, ge=1)
    format: Literal["csv", "json"] = "csv"
    kinetic_weight: Literal["alpha0", "unit"] = "alpha0"


class ChecksConfig(_Section):
    allow_inadmissible: bool = False
    admissibility_nt: int = Field(41, ge=2)
    admissibility_ns: int = Field(41, ge=2)
    tolerance: float = Field(1e-9, ge=0)


class KernelCheckConfig(_Section):
    t_range: tuple[float, float] = (0.0, 5.0)
    s_range: tuple[float, float] = (0.0, 10.0)
    nt: int = Field(41, ge=2)
    ns: int = Field(101, ge=2)
    tolerance: float = Field(1e-9, ge=0)

    @model_validator(mode="after")
    def _ranges(self):
        if self.t_range[1] < self.t_range[0]:
            raise ValueError("t_range must satisfy lo <= hi")
        if self.s_range[1] < self.s_range[0] or self.s_range[0] < 0:
            raise ValueError("s_range must satisfy 0 <= lo <= hi")
        return self


class FluxConfig(_Section):
    model: Literal["maxwell", "quintanilla", "burgers"] = "maxwell"
    kappa0: float = Field(1.0, gt=0)
    xi0: float = Field(1.0, gt=0)
    h0: float = Field(0.0, ge=0)
    nu0: Optional[float] = Field(None, gt=0)
    signal: str = "1"
    dsignal: Optional[str] = None
    q_init: float = 0.0
    T: float = Field(2.0, gt=0)
    dts: list[float] = Field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3], min_length=1)
    tolerance: float = Field(1e-4, gt=0)
    recurrence: bool = False
    quadrature: Literal["product", "trapezoid"] = "product"

    @field_validator("signal", "dsignal", mode="before")
    @classmethod
    def _expr(cls, v):
        return None if v is None else _expr_validator(("t",))(v)

    @model_validator(mode="after")
    def _burgers(self):
        if self.model == "burgers" and self.nu0 is None:
            raise ValueError("nu0 is required for model 'burgers'")
        if any(d <= 0 for d in self.dts):
            raise ValueError("every dt in dts must be > 0")
        return self


class ConvergenceConfig(_Section):
    exact: str = "sin(pi*x)*t^2"
    levels: list[tuple[int, int]] = Field(
        default_factory=lambda: [(19, 40), (39, 80), (79, 160)], min_length=3)
    manufacture_source: bool = True
    order_range: tuple[float, float] = (1.8, 2.2)

    @field_validator("exact", mode="before")
    @classmethod
    def _expr(cls, v):
        return _expr_validator(("x", "t"))(v)


class RunConfig(_Section):
    kernel: KernelConfig = Field(default_factory=ClassicalExpKernel)
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    checks: ChecksConfig = Field(default_factory=ChecksConfig)
    kernel_check: KernelCheckConfig = Field(default_factory=KernelCheckConfig)
    flux: FluxConfig = Field(default_factory=FluxConfig)
    convergence: ConvergenceConfig = Field(default_factory=ConvergenceConfig)
    deterministic: Literal[True] = True


# --- strictness ------------------------------------------------------------


def _edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _suggest(key: str, known) -> Optional[str]:
    best = min(known, key=lambda k: (_edit_distance(key, k), k), default=None)
    if best is not None and _edit_distance(key, best) <= 2:
        return best
    return None


_SECTION_MODELS = {name: f.annotation for name, f in RunConfig.model_fields.items()}


def _unknown_keys(raw: dict) -> list[tuple[str, Optional[str]]]:
    found = []

    def scan(d, model, prefix):
        known = list(model.model_fields)
        for key in list(d):
            if key not in known:
                found.append((f"{prefix}{key}", _suggest(str(key), known), d, key))

    scan(raw, RunConfig, "")
    for name in RunConfig.model_fields:
        sub = raw.get(name)
        if not isinstance(sub, dict):
            continue
        if name == "kernel":
            model = KERNEL_MODELS.get(sub.get("family", "classical_exp"))
            if model is None:
                continue
        elif name == "deterministic":
            continue
        else:
            model = _SECTION_MODELS[name]
        scan(sub, model, f"{name}.")
    return found


def _fmt_num(v) -> str:
    return f"{v:g}" if isinstance(v, (int, float)) else str(v)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = [str(p) for p in err["loc"] if str(p) not in KERNEL_MODELS]
        key = loc[-1] if loc else "<root>"
        path = ".".join(loc) or "<root>"
        ctx = err.get("ctx") or {}
        kind = err["type"]
        if kind == "greater_than":
            msg = f"{key} > {_fmt_num(ctx['gt'])} required"
        elif kind == "greater_than_equal":
            msg = f"{key} >= {_fmt_num(ctx['ge'])} required"
        elif kind == "less_than_equal":
            msg = f"{key} <= {_fmt_num(ctx['le'])} required"
        else:
            msg = err["msg"]
        lines.append(f"{path}: {msg}")
    return "invalid configuration: " + "; ".join(lines)


def load_config_text(text: str, strict: bool = True, source: str = "<config>") -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{source}: parse error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = _unknown_keys(raw)
    if unknown:
        msgs = [f"unknown key {path!r}" + (f" (did you mean {sug!r}?)" if sug else "")
                for path, sug, _, _ in unknown]
        if strict:
            raise ConfigError(f"{source}: " + "; ".join(msgs))
        for (_, _, d, key), m in zip(unknown, msgs):
            warnings.warn(m + "; ignored", stacklevel=2)
            d.pop(key, None)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from None


def parse_config(path, strict: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return load_config_text(text, strict=strict, source=str(path))


def config_echo(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json")


def emit_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_echo(cfg), sort_keys=False)


# --- builders --------------------------------------------------------------


def _fn1(expr, var):
    return lambda v: expr(**{var: v})


def build_kernel(kc) -> AgingKernel:
    if isinstance(kc, ClassicalExpKernel):
        return make_classical_exponential(kc.kappa0, kc.xi0)
    if isinstance(kc, LinearAgingKernel):
        return make_linear_aging(kc.alpha)
    if isinstance(kc, ConstantKernel):
        return make_constant(kc.k0)
    eps = parse_expression(kc.eps, ("t",))
    deps = parse_expression(kc.deps, ("t",)) if kc.deps else eps.diff("t")
    params = {"eps": kc.eps, "deps": kc.deps or deps.source}
    if isinstance(kc, AgingExpKernel):
        return make_aging_exponential(_fn1(eps, "t"), _fn1(deps, "t"), params=params)
    base = parse_expression(kc.base, ("y",))
    d1 = base.diff("y")
    d2 = d1.diff("y")
    params["base"] = kc.base
    return make_rescaled(_fn1(base, "y"), _fn1(eps, "t"), _fn1(deps, "t"),
                         _fn1(d1, "y"), _fn1(d2, "y"), params=params)


def _xt(expr):
    return lambda x, t: expr(x=x, t=t)


def build_problem(cfg: RunConfig, kernel: Optional[AgingKernel] = None) -> ProblemSpec:
    pc = cfg.problem
    kernel = kernel or build_kernel(cfg.kernel)
    u0 = parse_expression(pc.u0)
    u1 = parse_expression(pc.u1)
    F = parse_expression(pc.F)
    f = None if F.is_constant_zero() or F.source.strip() in ("0", "0.0") else _xt(F)
    return ProblemSpec(kernel, lambda x: u0(x=x, t=0.0), lambda x: u1(x=x, t=0.0), f,
                       pc.T, pc.alpha0, pc.alpha1, pc.t_offset)


def build_exact(source: str) -> ManufacturedSolution:
    u = parse_expression(source)
    ut = u.diff("t")
    return ManufacturedSolution(_xt(u), _xt(ut), _xt(ut.diff("t")), _xt(u.diff("x").diff("x")))


def build_signal(fc: FluxConfig) -> GradientSignal:
    g = parse_expression(fc.signal, ("t",))
    dg = parse_expression(fc.dsignal, ("t",)) if fc.dsignal else g.diff("t")
    return GradientSignal(lambda t: g(t=t) * np.ones_like(np.asarray(t, dtype=float)),
                          lambda t: dg(t=t) * np.ones_like(np.asarray(t, dtype=float)),
                          fc.signal)


def build_flux_params(fc: FluxConfig) -> FluxModelParams:
    return FluxModelParams(kappa0=fc.kappa0, xi0=fc.xi0, h0=fc.h0, nu0=fc.nu0)
