"""Fixed-step RK4 integration of an assembled network with scripted events."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from ..model import CircuitParams, EaholabError, SQRT2
from . import kernel
from . import _kernel_py as layout
from .network import Conditions, System, synchronized_state

EVENT_KINDS = (
    "grid_frequency",  # Hz
    "grid_voltage",  # RMS V
    "p_ref",
    "q_ref",
    "load",  # ohm, None opens the load breaker
    "breaker",  # True closes the grid breaker
    "grid_inductance",
    "grid_resistance",
)
INIT_POLICIES = ("synchronized", "equilibrium", "startup")
STARTUP_FRACTION = 0.01
# RK4 is stable on the negative real axis up to |h lambda| ~ 2.78; keep margin
RK4_REAL_LIMIT = 2.5
INV_CHANNELS = ("v_alpha", "v_beta", "v_p", "theta", "omega", "p", "q", "i_alpha", "p_ctrl", "q_ctrl")
SHARED_CHANNELS = ("v_pcc", "i_g", "i_load")
CSV_INV_CHANNELS = ("v_alpha", "v_beta", "v_p", "omega", "p", "q", "i_alpha")
CSV_SHARED_CHANNELS = ("v_pcc", "i_g")


class ScenarioError(EaholabError):
    pass


class SimulationDiverged(EaholabError):
    """A state left the finite range. Carries the partial record."""

    def __init__(self, t: float, state: np.ndarray, series: "TimeSeries"):
        super().__init__(f"divergence at t={t:.6g} s")
        self.t = t
        self.state = state
        self.series = series


@dataclass(frozen=True)
class Event:
    """A piecewise-constant change applied at time ``t``.

    ``inverter`` (0-based) restricts setpoint events to one inverter; None
    applies them to all.
    """

    t: float
    kind: str
    value: float | bool | None
    inverter: int | None = None


@dataclass(frozen=True)
class Scenario:
    duration: float
    dt: float = 5e-5
    init: str = "synchronized"
    events: tuple[Event, ...] = ()

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt)

    def step_of(self, t: float) -> int:
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ScenarioError(f"event time {t} is not on a step boundary of dt={self.dt}")
        return k

    def validate(self) -> None:
        if not self.dt > 0:
            raise ScenarioError("time step must be positive")
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        self.step_of(self.duration)
        if self.init not in INIT_POLICIES:
            raise ScenarioError(f"unknown init policy {self.init!r}")
        for e in self.events:
            if e.kind not in EVENT_KINDS:
                raise ScenarioError(f"unknown event kind {e.kind!r}")
            if not 0 <= e.t <= self.duration:
                raise ScenarioError(f"event at t={e.t} lies outside [0, {self.duration}]")
            self.step_of(e.t)


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled record of a run. Channel arrays are read-only."""

    t: np.ndarray
    channels: MappingProxyType
    n_inverters: int
    events: tuple[Event, ...] = ()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def names(self) -> list[str]:
        return list(self.channels)

    def __len__(self) -> int:
        return len(self.t)

    def kcl_residual(self) -> np.ndarray:
        s = sum(self[f"i_alpha_{j + 1}"] for j in range(self.n_inverters))
        return s - self["i_load"] - self["i_g"]

    def window(self, t0: float, t1: float | None = None) -> np.ndarray:
        """Boolean mask of samples with ``t0 <= t < t1``."""
        m = self.t >= t0 - 1e-12
        if t1 is not None:
            m &= self.t < t1 - 1e-12
        return m

    def csv_columns(self) -> list[str]:
        cols = ["t"]
        for j in range(self.n_inverters):
            cols += [f"{c}_{j + 1}" for c in CSV_INV_CHANNELS]
        return cols + list(CSV_SHARED_CHANNELS)

    def to_csv(self, path) -> None:
        cols = self.csv_columns()
        data = np.column_stack([self.t] + [self[c] for c in cols[1:]])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def _apply(c: Conditions, e: Event) -> None:
    if e.kind == "grid_frequency":
        c.omega_g = 2 * math.pi * float(e.value)
    elif e.kind == "grid_voltage":
        c.v_g_rms = float(e.value)
    elif e.kind in ("p_ref", "q_ref"):
        idx = range(len(c.setpoints)) if e.inverter is None else [e.inverter]
        for j in idx:
            c.setpoints[j] = dataclasses.replace(c.setpoints[j], **{e.kind: float(e.value)})
    elif e.kind == "load":
        c.r_load = None if e.value is None else float(e.value)
    elif e.kind == "breaker":
        c.connected = bool(e.value)
    elif e.kind == "grid_inductance":
        c.l_g = float(e.value)
    elif e.kind == "grid_resistance":
        c.r_g = float(e.value)


def _check_step(system: System, c: Conditions, dt: float) -> None:
    system.check(c)
    rate = system.fastest_rate(c)
    if rate * dt > RK4_REAL_LIMIT:
        raise ScenarioError(
            f"time step {dt:g} s is too large for this network (fastest rate {rate:.4g} 1/s); "
            f"use dt < {RK4_REAL_LIMIT / rate:.3g} s"
        )


def _schedule_events(system: System) -> list[Event]:
    g, ld = system.grid, system.load
    out = [Event(t, "grid_voltage", v) for t, v in g.v_g_steps]
    out += [Event(t, "grid_frequency", w / (2 * math.pi)) for t, w in g.omega_g_steps]
    out += [Event(t, "breaker", c) for t, c in g.breaker_steps]
    out += [Event(t, "load", r) for t, r in ld.steps]
    return out


def equilibrium_state(system: System, conditions: Conditions) -> np.ndarray:
    """Start a single grid-tied inverter on its reduced-model equilibrium."""
    from ..analysis import OperatingInputs, find_equilibrium

    if system.n_inverters != 1 or not conditions.connected or conditions.r_load is not None:
        raise ScenarioError("equilibrium start needs one grid-connected inverter without local load")
    inv = system.inverters[0]
    circuit = CircuitParams(l_f=inv.l_f, l_g=conditions.l_g, r_g=conditions.r_g, r_f=inv.r_f)
    inputs = OperatingInputs(conditions.v_g_rms, conditions.omega_g, conditions.setpoints[0], circuit, inv.params)
    xe = find_equilibrium(inputs)
    th_g = system.grid.theta_g0
    v, th = xe[0], xe[1]
    i_d, i_q = xe[-2], xe[-1]
    i_a = SQRT2 * (i_d * math.cos(th_g) - i_q * math.sin(th_g))
    i_b = SQRT2 * (i_d * math.sin(th_g) + i_q * math.cos(th_g))
    x = np.zeros(system.n_states)
    if inv.kind == "droop":
        p = v * (math.cos(th) * i_d + math.sin(th) * i_q)
        q = v * (math.sin(th) * i_d - math.cos(th) * i_q)
        x[0:6] = th_g + th, p, q, i_a, i_b, i_a
    else:
        vp = SQRT2 * v
        x[0:5] = vp * math.cos(th_g + th), vp * math.sin(th_g + th), i_a, i_b, i_a
    x[-1] = th_g
    return x


def initial_state(system: System, scenario: Scenario, conditions: Conditions) -> np.ndarray:
    if scenario.init == "startup":
        return synchronized_state(system, STARTUP_FRACTION)
    if scenario.init == "equilibrium":
        return equilibrium_state(system, conditions)
    return synchronized_state(system)


def _unwrap_phase(theta: np.ndarray, t: np.ndarray, omega_0: float) -> np.ndarray:
    # remove the nominal rotation first so coarse decimation still unwraps
    ramp = omega_0 * t
    return np.unwrap(theta - ramp) + ramp


def _build_series(system: System, obs: np.ndarray, events) -> TimeSeries:
    ch = {}
    for j, inv in enumerate(system.inverters):
        c = 1 + layout.OBS_PER_INV * j
        for k, name in enumerate(INV_CHANNELS):
            col = obs[:, c + k].copy()
            if name == "theta" and len(col):
                col = _unwrap_phase(col, obs[:, 0], inv.setpoints.omega_0)
            ch[f"{name}_{j + 1}"] = col
    c = 1 + layout.OBS_PER_INV * system.n_inverters
    for k, name in enumerate(SHARED_CHANNELS):
        ch[name] = obs[:, c + k].copy()
    t = obs[:, 0].copy()
    for a in [t, *ch.values()]:
        a.flags.writeable = False
    return TimeSeries(t, MappingProxyType(ch), system.n_inverters, tuple(events))


def simulate(
    system: System,
    scenario: Scenario,
    decimation: int = 1,
    backend: str | None = None,
    x0: np.ndarray | None = None,
) -> TimeSeries:
    """Integrate ``system`` over ``scenario`` with classical RK4.

    Events take effect at their step boundary. Samples are logged every
    ``decimation`` steps, including t = 0 and, when it falls on the grid,
    the final instant.

    Raises
    ------
    SimulationDiverged
        When any state stops being finite (or exceeds 1e15).
    """
    scenario.validate()
    if int(decimation) != decimation or decimation < 1:
        raise ScenarioError("decimation must be an integer >= 1")
    decimation = int(decimation)
    kern = kernel.get_backend(backend)

    # profile steps past the end of a shortened run never fire
    scheduled = [e for e in _schedule_events(system) if e.t <= scenario.duration]
    events = sorted(scheduled + list(scenario.events), key=lambda e: e.t)
    by_step: dict[int, list[Event]] = {}
    for e in events:
        if not 0 <= e.t <= scenario.duration:
            raise ScenarioError(f"event at t={e.t} lies outside [0, {scenario.duration}]")
        by_step.setdefault(scenario.step_of(e.t), []).append(e)

    cond = system.conditions_at(-math.inf)  # initial values; t = 0 steps follow as events
    for e in by_step.pop(0, []):
        _apply(cond, e)
    _check_step(system, cond, scenario.dt)

    x = np.ascontiguousarray(x0 if x0 is not None else initial_state(system, scenario, cond), dtype=np.float64)
    if x.shape != (system.n_states,):
        raise ScenarioError(f"initial state must have {system.n_states} entries")
    x = x.copy()
    ig_index = system.n_states - 2 if system.ig_state else None

    n = scenario.n_steps
    n_rows = -(-n // decimation) + (1 if n % decimation == 0 else 0)
    width = 1 + layout.OBS_PER_INV * system.n_inverters + len(SHARED_CHANNELS)
    obs = np.zeros((n_rows, width))
    dt = scenario.dt

    bounds = sorted(k for k in by_step if k < n) + [n]
    k = 0
    row = 0
    for k_next in bounds:
        if k_next > k:
            inv_tab = np.ascontiguousarray(system.inv_table(cond))
            net = system.net_vector(cond)
            rows, failed = kern.integrate(
                x, system.kinds, system.offsets, inv_tab, net, k * dt, dt, k_next - k, k, decimation, obs, row
            )
            row += rows
            if failed >= 0:
                t_fail = (k + failed) * dt
                raise SimulationDiverged(t_fail, x.copy(), _build_series(system, obs[:row], events))
            k = k_next
        if k_next == n:
            break
        for e in by_step[k_next]:
            was_connected = cond.connected
            _apply(cond, e)
            if was_connected and not cond.connected and ig_index is not None:
                x[ig_index] = 0.0  # the opening breaker interrupts the branch current
        _check_step(system, cond, dt)

    if n % decimation == 0:
        kern.observe(x, system.kinds, system.offsets, np.ascontiguousarray(system.inv_table(cond)),
                     system.net_vector(cond), n * dt, obs, row)
        row += 1
    return _build_series(system, obs[:row], events)
