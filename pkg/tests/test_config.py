import math

import pytest

from eaholab import config
from eaholab.model import ConfigError

NAMES = ["s1-freq-step", "s2-voltage-sag-swell", "s3-pref-step", "s4-island-sharing",
         "s5-grid-disconnect", "s6-robustness"]


def test_builtins_present():
    assert set(NAMES) <= set(config.builtin_names())


@pytest.mark.parametrize("name", NAMES)
def test_builtins_resolve(name):
    runs = config.build_runs(config.load(name))
    assert runs
    for r in runs:
        r.scenario.validate()
        assert r.decimation >= 1


def test_short_names():
    assert config.load("s3") == config.load("s3-pref-step")


def test_table1_values():
    sc = config.parse_system(config.load("table1"))
    assert sc.params["eaho"].eta_e == 0.0016
    assert sc.circuit.r_f == 0.0
    assert sc.ratings.v_p_max == pytest.approx(1.1 * 311)
    assert sc.ratings.d_omega_max == pytest.approx(math.pi)


def test_s6_variants():
    names = [r.name for r in config.build_runs(config.load("s6"))]
    assert len(names) == len(set(names)) >= 4
    assert "startup-mu4" in names


def test_empty_config_names_first_key(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    with pytest.raises(ConfigError, match=r"missing key: system\.p_0"):
        config.build_runs(config.load(p))


def test_bad_inputs(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[system\n")
    with pytest.raises(ConfigError, match="invalid TOML"):
        config.load(bad)
    cfg = config.load("table1")
    cfg["system"]["p_0"] = "big"
    with pytest.raises(ConfigError, match="must be a number"):
        config.parse_system(cfg)
    cfg = config.load("table1")
    cfg["system"]["bogus"] = 1.0
    with pytest.raises(ConfigError, match="unknown key"):
        config.parse_system(cfg)
    with pytest.raises(ConfigError, match="unknown controller"):
        config.parse_controllers("eaho+vsm")


def test_event_parsing():
    cfg = config.load("s3")
    cfg["scenario"]["events"].append({"t": 2.0, "kind": "q_ref", "value": 100.0, "inverter": 1})
    cfg["scenario"]["events"].append({"t": 2.5, "kind": "warp", "value": 1.0})
    with pytest.raises(ConfigError, match="unknown event"):
        config.build_run(cfg)
    cfg["scenario"]["events"].pop()
    ev = config.build_run(cfg).scenario.events
    assert ev[-1].inverter == 0 and ev[-1].kind == "q_ref"


def test_dump_round_trip(tmp_path):
    cfg = config.load("s5")
    config.dump(cfg, tmp_path / "x.toml")
    assert config.load(tmp_path / "x.toml") == cfg
