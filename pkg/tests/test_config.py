import pytest
import yaml

from agingheat.config import (
    ConfigError,
    RunConfig,
    build_kernel,
    build_problem,
    emit_config,
    load_config_text,
    parse_config,
)

MINIMAL = """
kernel: {family: classical_exp, kappa0: 1.0, xi0: 1.0}
problem: {u0: "sin(pi*x)", u1: "0", F: "0"}
"""


def test_minimal_config_materializes_defaults():
    cfg = load_config_text(MINIMAL)
    echo = yaml.safe_load(emit_config(cfg))
    assert echo["grid"] == {"nx": 100, "nt": 1000, "c_cfl": 0.9, "history_window": None}
    assert echo["deterministic"] is True
    assert echo["output"]["format"] == "csv"


def test_negative_xi0_named():
    with pytest.raises(ConfigError, match=r"kernel\.xi0: xi0 > 0 required"):
        load_config_text("kernel: {family: classical_exp, xi0: -1}")


def test_unknown_key_suggestion():
    with pytest.raises(ConfigError, match=r"unknown key 'kernel\.kapa0' \(did you mean 'kappa0'\?\)"):
        load_config_text("kernel: {family: classical_exp, kapa0: 1}")


def test_unknown_key_dropped_when_not_strict():
    with pytest.warns(UserWarning, match="kapa0"):
        cfg = load_config_text("kernel: {family: classical_exp, kapa0: 1}", strict=False)
    assert cfg.kernel.kappa0 == 1.0


def test_unknown_section_without_suggestion():
    with pytest.raises(ConfigError, match="unknown key 'plotting'$"):
        load_config_text("plotting: {}")


def test_parse_error_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        load_config_text("kernel:\n  - : [\n")


def test_bad_expression_rejected():
    with pytest.raises(ConfigError, match="problem.u0"):
        load_config_text("problem: {u0: 'foo(x)'}")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.yaml")


@pytest.mark.parametrize("text", [
    MINIMAL,
    "kernel: {family: aging_exp, eps: '1/(1+t)'}\ngrid: {history_window: 0.5}",
    "kernel: {family: rescaled, base: 'exp(-y)', eps: '1/(1+t)'}\noutput: {format: json}",
    "kernel: {family: linear_aging, alpha: 2}\nproblem: {t_offset: 2.5, alpha1: 0.5}",
    "kernel: {family: constant, k0: 2}\nflux: {model: burgers, nu0: 3, xi0: 2, h0: 0.1}",
])
def test_round_trip(text, tmp_path):
    cfg = load_config_text(text)
    path = tmp_path / "c.yaml"
    path.write_text(emit_config(cfg))
    again = parse_config(path)
    assert again == cfg
    assert emit_config(again) == emit_config(cfg)


def test_burgers_needs_nu0():
    with pytest.raises(ConfigError, match="nu0"):
        load_config_text("flux: {model: burgers}")


def test_determinism_flag_cannot_be_disabled():
    with pytest.raises(ConfigError):
        load_config_text("deterministic: false")


def test_builders():
    cfg = load_config_text("kernel: {family: aging_exp, eps: '1/(1+t)'}")
    k = build_kernel(cfg.kernel)
    assert k(1.0, 1.0) == pytest.approx(0.1353352832366127)
    # derivative of eps is taken symbolically when not given
    assert k.eval_dt(1.0, 1.0) == pytest.approx(-0.25 * 4 * 0.1353352832366127)
    p = build_problem(RunConfig())
    assert p.F is None and p.T == 1.0


ROOT = __import__("pathlib").Path(__file__).resolve().parents[1]


def test_reference_schema_is_current():
    text = (ROOT / "docs" / "config_reference.yaml").read_text()
    assert load_config_text(text) == RunConfig()
    assert text.split("\n", 1)[1] == emit_config(RunConfig())


@pytest.mark.parametrize("name", sorted(p.name for p in (ROOT / "configs").glob("*.yaml")))
def test_shipped_configs_parse(name):
    parse_config(ROOT / "configs" / name)
