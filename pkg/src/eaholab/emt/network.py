"""Averaged single-phase network: N inverters, optional resistive load at the
PCC, and an R-L grid branch behind a breaker.

Each inverter drives its oscillator (or droop) alpha voltage through its own
filter inductor into the PCC. The PCC voltage is algebraic:

* load in circuit, grid branch modelled:  v_pcc = R_L (sum i_j - i_g)
* no load, grid connected:                the grid branch carries sum i_j and
  v_pcc follows from the inductor voltage balance
* breaker open:                           v_pcc = R_L sum i_j
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..controllers import SOGI_GAIN
from ..model import (
    AHOParams,
    ControllerParams,
    DroopParams,
    EaholabError,
    EAHOParams,
    GridSource,
    LoadProfile,
    Setpoints,
    rms_to_peak,
)
from . import _kernel_py as layout

KIND_CODES = {"aho": layout.AHO, "eaho": layout.EAHO, "droop": layout.DROOP}


class FloatingNodeError(EaholabError):
    """The PCC has no path for the inverter currents."""


class TopologyError(EaholabError):
    pass


@dataclass(frozen=True)
class InverterSpec:
    params: ControllerParams
    setpoints: Setpoints
    l_f: float
    r_f: float = 0.0
    sogi_gain: float = SOGI_GAIN

    @property
    def kind(self) -> str:
        return self.params.kind

    @property
    def n_states(self) -> int:
        return 6 if self.kind == "droop" else 5


@dataclass
class Conditions:
    """Piecewise-constant inputs between two events (mutable, per run)."""

    setpoints: list[Setpoints]
    r_load: float | None
    connected: bool
    v_g_rms: float
    omega_g: float
    l_g: float
    r_g: float


@dataclass(frozen=True)
class System:
    inverters: tuple[InverterSpec, ...]
    load: LoadProfile
    grid: GridSource
    l_g: float
    r_g: float
    ig_state: bool
    kinds: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    n_states: int

    @property
    def n_inverters(self) -> int:
        return len(self.inverters)

    @property
    def labels(self) -> list[str]:
        out = []
        for j, inv in enumerate(self.inverters):
            names = ("theta", "p_f", "q_f") if inv.kind == "droop" else ("v_alpha", "v_beta")
            out += [f"{n}_{j + 1}" for n in names + ("sogi_x1", "sogi_x2", "i")]
        if self.ig_state:
            out.append("i_g")
        out.append("theta_g")
        return out

    def current_index(self, j: int) -> int:
        return int(self.offsets[j]) + self.inverters[j].n_states - 1

    def conditions_at(self, t: float = 0.0) -> Conditions:
        return Conditions(
            setpoints=[inv.setpoints for inv in self.inverters],
            r_load=self.load.at(t),
            connected=self.grid.connected_at(t),
            v_g_rms=self.grid.v_g_at(t),
            omega_g=self.grid.omega_g_at(t),
            l_g=self.l_g,
            r_g=self.r_g,
        )

    def check(self, c: Conditions) -> None:
        if not c.connected and c.r_load is None:
            raise FloatingNodeError("floating node: breaker and load both open")
        if c.connected and self.ig_state and c.r_load is None:
            raise TopologyError("the load cannot open while the grid branch is a separate state")
        if c.connected and self.ig_state and not c.l_g > 0:
            raise TopologyError("a grid branch state needs l_g > 0")

    def fastest_rate(self, c: Conditions) -> float:
        """Upper estimate of the fastest decay rate (1/s) of the passive network."""
        y = sum(1.0 / inv.l_f for inv in self.inverters)
        rate = max(inv.r_f / inv.l_f for inv in self.inverters)
        if c.r_load is not None:
            if c.connected and self.ig_state:
                y += 1.0 / c.l_g
                rate = max(rate, c.r_g / c.l_g)
            rate += c.r_load * y
        elif c.connected and c.l_g > 0:
            rate = max(rate, c.r_g / (c.l_g + min(inv.l_f for inv in self.inverters)))
        return rate

    def inv_table(self, c: Conditions) -> np.ndarray:
        rows = np.zeros((self.n_inverters, layout.N_PARAMS))
        for j, (inv, sp) in enumerate(zip(self.inverters, c.setpoints)):
            prm = inv.params
            r = rows[j]
            if isinstance(prm, AHOParams):
                r[layout.P_G1], r[layout.P_G2] = prm.eta, prm.mu
            elif isinstance(prm, EAHOParams):
                r[layout.P_G1], r[layout.P_G2] = prm.eta_e, prm.mu_e
            elif isinstance(prm, DroopParams):
                r[layout.P_G1], r[layout.P_G2] = prm.m_p, prm.m_q
                r[layout.P_WP], r[layout.P_WQ] = prm.omega_p, prm.omega_q
            r[layout.P_PREF], r[layout.P_QREF] = sp.p_ref, sp.q_ref
            r[layout.P_W0], r[layout.P_VP0] = sp.omega_0, sp.v_p0
            r[layout.P_LF], r[layout.P_RF], r[layout.P_K] = inv.l_f, inv.r_f, inv.sogi_gain
        return rows

    def net_vector(self, c: Conditions) -> np.ndarray:
        net = np.zeros(layout.N_NET)
        net[layout.N_IG_STATE] = float(self.ig_state)
        net[layout.N_CONNECTED] = float(c.connected)
        net[layout.N_RLOAD] = c.r_load if c.r_load is not None else 0.0
        net[layout.N_LG] = c.l_g
        net[layout.N_RG] = c.r_g
        net[layout.N_VG] = rms_to_peak(c.v_g_rms)
        net[layout.N_WG] = c.omega_g
        return net

    def derivative(self, x, t: float = 0.0, conditions: Conditions | None = None) -> np.ndarray:
        """State derivative with the scheduled inputs at time ``t``."""
        c = conditions or self.conditions_at(t)
        self.check(c)
        return np.array(
            layout.derivative(np.asarray(x, float), self.kinds, self.offsets, self.inv_table(c), self.net_vector(c))
        )


def assemble(
    inverters: list[InverterSpec] | tuple[InverterSpec, ...],
    load: LoadProfile,
    grid: GridSource,
    l_g: float,
    r_g: float,
) -> System:
    """Lay out the state vector and check the topology at t = 0."""
    if not inverters:
        raise TopologyError("at least one inverter is required")
    if not grid.ever_connected() and not load.ever_closed():
        raise FloatingNodeError("floating node: no load and the grid is never connected")
    ig_state = grid.ever_connected() and load.ever_closed()
    offsets = []
    o = 0
    for inv in inverters:
        offsets.append(o)
        o += inv.n_states
    n_states = o + int(ig_state) + 1
    sys_ = System(
        inverters=tuple(inverters),
        load=load,
        grid=grid,
        l_g=l_g,
        r_g=r_g,
        ig_state=ig_state,
        kinds=np.array([KIND_CODES[inv.kind] for inv in inverters], dtype=np.int64),
        offsets=np.array(offsets, dtype=np.int64),
        n_states=n_states,
    )
    sys_.check(sys_.conditions_at(0.0))
    return sys_


def synchronized_state(system: System, amplitude_scale: float = 1.0) -> np.ndarray:
    """Oscillators on their nominal circle in phase with the grid, no current."""
    x = np.zeros(system.n_states)
    th = system.grid.theta_g0
    for j, inv in enumerate(system.inverters):
        o = int(system.offsets[j])
        sp = inv.setpoints
        if inv.kind == "droop":
            x[o], x[o + 1], x[o + 2] = th, sp.p_ref, sp.q_ref
        else:
            a = amplitude_scale * sp.v_p0
            x[o], x[o + 1] = a * math.cos(th), a * math.sin(th)
    x[-1] = th
    return x
