"""TOML configuration: system parameters, scenario scripts and output options.

Layout::

    [system]      # parameter-table names, SI units, v_p0 peak, v_g_rms RMS
    [scenario]    # duration, dt, init, controllers, initial setpoints, load
    [[scenario.events]]
    t = 1.0
    kind = "grid_frequency"
    value = 49.5
    [output]      # decimation, plot
    [[variants]]  # optional named reruns overriding system/scenario keys
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .emt.network import InverterSpec, System, assemble
from .emt.simulate import EVENT_KINDS, Event, Scenario
from .model import (
    AHOParams,
    CircuitParams,
    ConfigError,
    ControllerParams,
    DroopParams,
    EAHOParams,
    GridSource,
    LoadProfile,
    RatingsAndLimits,
    Setpoints,
    peak_to_rms,
    validate_system,
)

REQUIRED_SYSTEM_KEYS = (
    "p_0", "q_0", "v_dc", "omega_0", "v_p0", "l_f", "c_f", "l_g", "r_g",
    "eta", "mu", "eta_e", "mu_e", "m_p", "m_q", "omega_p", "omega_q",
)
OPTIONAL_SYSTEM_KEYS = ("r_f", "d_omega_max", "v_p_max", "v_g_rms")
CONTROLLER_KINDS = ("aho", "eaho", "droop")
BUILTIN_PACKAGE = "eaholab.scenarios"


@dataclass(frozen=True)
class SystemConfig:
    setpoints: Setpoints
    ratings: RatingsAndLimits
    circuit: CircuitParams
    params: dict
    v_g_rms: float

    def controller(self, kind: str) -> ControllerParams:
        try:
            return self.params[kind]
        except KeyError:
            raise ConfigError(f"unknown controller {kind!r}") from None


@dataclass(frozen=True)
class RunSpec:
    """One simulation run resolved from a config."""

    name: str
    system: System
    scenario: Scenario
    decimation: int
    controllers: tuple[str, ...]


def builtin_names() -> list[str]:
    files = resources.files(BUILTIN_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def load(source: str | Path) -> dict:
    """Parse a TOML file, or a built-in scenario given by name."""
    p = Path(source)
    names = builtin_names()
    if not p.exists() and str(source) not in names:
        # short form: "s3" for "s3-pref-step"
        hits = [n for n in names if n.split("-")[0] == str(source)]
        if len(hits) == 1:
            source = hits[0]
    if not p.exists() and str(source) in names:
        text = resources.files(BUILTIN_PACKAGE).joinpath(f"{source}.toml").read_text()
    else:
        try:
            text = p.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {source}: {e.strerror}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {source}: {e}") from None


def dump(cfg: dict, path: str | Path) -> None:
    Path(path).write_bytes(tomli_w.dumps(cfg).encode())


def _num(table: dict, key: str, where: str) -> float:
    if key not in table:
        raise ConfigError(f"missing key: {where}.{key}")
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(v)


def parse_system(cfg: dict) -> SystemConfig:
    s = cfg.get("system", {})
    if not isinstance(s, dict):
        raise ConfigError("[system] must be a table")
    vals = {k: _num(s, k, "system") for k in REQUIRED_SYSTEM_KEYS}
    for k in OPTIONAL_SYSTEM_KEYS:
        if k in s:
            vals[k] = _num(s, k, "system")
    unknown = set(s) - set(REQUIRED_SYSTEM_KEYS) - set(OPTIONAL_SYSTEM_KEYS)
    if unknown:
        raise ConfigError(f"unknown key: system.{sorted(unknown)[0]}")
    sp = Setpoints(0.0, 0.0, vals["omega_0"], vals["v_p0"])
    ratings = RatingsAndLimits(
        vals["p_0"], vals["q_0"],
        vals.get("d_omega_max", 2 * math.pi * 0.5),
        vals.get("v_p_max", 1.1 * vals["v_p0"]),
    )
    circuit = CircuitParams(
        l_f=vals["l_f"], l_g=vals["l_g"], r_g=vals["r_g"], r_f=vals.get("r_f", 0.0),
        c_f=vals["c_f"], v_dc=vals["v_dc"],
    )
    params = {
        "aho": AHOParams(vals["eta"], vals["mu"]),
        "eaho": EAHOParams(vals["eta_e"], vals["mu_e"]),
        "droop": DroopParams(vals["m_p"], vals["m_q"], vals["omega_p"], vals["omega_q"]),
    }
    bad = validate_system(sp, ratings, params.values(), circuit)
    if bad:
        v = bad[0]
        raise ConfigError(f"system.{v.field}: {v.message}")
    return SystemConfig(sp, ratings, circuit, params, vals.get("v_g_rms", peak_to_rms(vals["v_p0"])))


def _load_value(v):
    if v == "open" or v is False:
        return None
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ConfigError(f"load must be a resistance or \"open\", got {v!r}")


def _parse_events(raw) -> tuple[Event, ...]:
    out = []
    for k, e in enumerate(raw or ()):
        if not isinstance(e, dict):
            raise ConfigError(f"scenario.events[{k}] must be a table")
        for key in ("t", "kind", "value"):
            if key not in e:
                raise ConfigError(f"missing key: scenario.events[{k}].{key}")
        kind = e["kind"]
        if kind not in EVENT_KINDS:
            raise ConfigError(f"scenario.events[{k}].kind: unknown event {kind!r}")
        value = e["value"]
        if kind == "load":
            value = _load_value(value)
        elif kind == "breaker":
            value = value in (True, "closed", "close")
        inv = e.get("inverter")
        out.append(Event(float(e["t"]), kind, value, None if inv is None else int(inv) - 1))
    return tuple(out)


def parse_controllers(text: str) -> tuple[str, ...]:
    kinds = tuple(k.strip() for k in text.split("+"))
    for k in kinds:
        if k not in CONTROLLER_KINDS:
            raise ConfigError(f"unknown controller {k!r}; expected one of {', '.join(CONTROLLER_KINDS)}")
    return kinds


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def build_run(cfg: dict, controllers: tuple[str, ...] | None = None, name: str = "run") -> RunSpec:
    """Resolve a parsed config into an assembled system and a scenario."""
    sysc = parse_system(cfg)
    sc = cfg.get("scenario")
    if not isinstance(sc, dict):
        raise ConfigError("missing key: scenario")
    duration = _num(sc, "duration", "scenario")
    if controllers is None:
        raw = sc.get("controllers", ["eaho"])
        controllers = parse_controllers("+".join(raw) if isinstance(raw, list) else str(raw))
    p_ref = float(sc.get("p_ref", 0.0))
    q_ref = float(sc.get("q_ref", 0.0))
    sp = dataclasses.replace(sysc.setpoints, p_ref=p_ref, q_ref=q_ref)
    r_f = float(sc.get("r_f", sysc.circuit.r_f))
    inverters = [InverterSpec(sysc.controller(k), sp, sysc.circuit.l_f, r_f) for k in controllers]
    load_r = _load_value(sc.get("load", "open"))
    grid = GridSource(
        v_g_rms=float(sc.get("v_g_rms", sysc.v_g_rms)),
        omega_g=2 * math.pi * float(sc.get("grid_frequency", sysc.setpoints.omega_0 / (2 * math.pi))),
        connected=bool(sc.get("grid_connected", True)),
    )
    events = _parse_events(sc.get("events"))
    # network events become part of the source and load profiles
    profile = {"load": [], "breaker": [], "grid_voltage": [], "grid_frequency": []}
    rest = []
    for e in events:
        if e.kind in profile:
            profile[e.kind].append((e.t, e.value))
        else:
            rest.append(e)
    load = LoadProfile(load_r, tuple(profile["load"]))
    grid = dataclasses.replace(
        grid,
        breaker_steps=tuple(profile["breaker"]),
        v_g_steps=tuple((t, float(v)) for t, v in profile["grid_voltage"]),
        omega_g_steps=tuple((t, 2 * math.pi * float(v)) for t, v in profile["grid_frequency"]),
    )
    bad = validate_system(sp, sysc.ratings, [], sysc.circuit, grid, load)
    if bad:
        raise ConfigError(f"scenario: {bad[0].message}")
    system = assemble(inverters, load, grid, sysc.circuit.l_g, sysc.circuit.r_g)
    scenario = Scenario(
        duration=duration,
        dt=float(sc.get("dt", 5e-5)),
        init=str(sc.get("init", "synchronized")),
        events=tuple(rest),
    )
    out = cfg.get("output", {})
    decimation = int(out.get("decimation", 10))
    if decimation < 1:
        raise ConfigError("output.decimation must be >= 1")
    return RunSpec(name, system, scenario, decimation, tuple(controllers))


def build_runs(cfg: dict, controllers: tuple[str, ...] | None = None) -> list[RunSpec]:
    """One run per ``[[variants]]`` entry, or a single run without variants."""
    variants = cfg.get("variants")
    if not variants:
        return [build_run(cfg, controllers, cfg.get("scenario", {}).get("name", "run"))]
    base = {k: v for k, v in cfg.items() if k != "variants"}
    runs = []
    for k, v in enumerate(variants):
        if "name" not in v:
            raise ConfigError(f"missing key: variants[{k}].name")
        over = {key: v[key] for key in ("system", "scenario", "output") if key in v}
        runs.append(build_run(_merge(base, over), controllers, v["name"]))
    return runs
