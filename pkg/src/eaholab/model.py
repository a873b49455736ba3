"""Domain types shared by every part of the package.

Unit conventions
----------------
* alpha-beta signals (oscillator voltages, inverter currents) are
  instantaneous and peak-valued.
* The reduced dq-frame model works in RMS: ``v = v_p / sqrt(2)``. Use
  :func:`peak_to_rms` and :func:`rms_to_peak` for every crossing; nothing in
  the package converts implicitly.
* Angular quantities are in rad and rad/s. Powers are single-phase averages
  in W and var.

All types are frozen dataclasses, so they can be shared freely between
threads and worker processes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Iterable, Sequence, Union

SQRT2 = math.sqrt(2.0)


def peak_to_rms(x: float) -> float:
    return x / SQRT2


def rms_to_peak(x: float) -> float:
    return x * SQRT2


class EaholabError(Exception):
    """Base class for all package errors."""


class DomainError(EaholabError, ValueError):
    """An argument lies outside the domain where a law is defined."""


class ConfigError(EaholabError):
    """A configuration is incomplete or inconsistent."""


@dataclass(frozen=True)
class Setpoints:
    """Power references and nominal operating values of one inverter.

    ``v_p0`` is a peak amplitude (V); ``omega_0`` in rad/s.
    """

    p_ref: float
    q_ref: float
    omega_0: float
    v_p0: float


@dataclass(frozen=True)
class RatingsAndLimits:
    """Rated powers and the grid-code limits used for gain design.

    ``d_omega_max`` is the largest allowed frequency deviation (rad/s) and
    ``v_p_max`` the largest allowed peak voltage amplitude (V).
    """

    p_0: float
    q_0: float
    d_omega_max: float
    v_p_max: float


@dataclass(frozen=True)
class AHOParams:
    """Conventional Andronov-Hopf oscillator gains."""

    eta: float
    mu: float
    kind: ClassVar[str] = "aho"


@dataclass(frozen=True)
class EAHOParams:
    """Enhanced oscillator gains; ``eta_e`` is directly the P-f droop slope."""

    eta_e: float
    mu_e: float
    kind: ClassVar[str] = "eaho"


@dataclass(frozen=True)
class DroopParams:
    """Droop slopes plus the cut-off frequencies of the power low-pass filters.

    ``m_q`` maps var to *peak* volts.
    """

    m_p: float
    m_q: float
    omega_p: float
    omega_q: float
    kind: ClassVar[str] = "droop"


ControllerParams = Union[AHOParams, EAHOParams, DroopParams]
CONTROLLER_TYPES: dict[str, type] = {"aho": AHOParams, "eaho": EAHOParams, "droop": DroopParams}


@dataclass(frozen=True)
class CircuitParams:
    """Output filter and grid impedance.

    ``c_f`` and ``v_dc`` are carried so configurations mirror a hardware
    parameter table; the averaged models never use them.
    """

    l_f: float
    l_g: float
    r_g: float
    r_f: float = 0.0
    c_f: float = 0.0
    v_dc: float = 0.0

    @property
    def l_t(self) -> float:
        return self.l_f + self.l_g

    @property
    def r_t(self) -> float:
        return self.r_f + self.r_g

    def x_t(self, omega: float) -> float:
        return omega * self.l_t


def _check_steps(steps: Sequence[tuple], what: str) -> list["Violation"]:
    times = [s[0] for s in steps]
    if any(b <= a for a, b in zip(times, times[1:])):
        return [Violation("steps_not_increasing", what, f"{what} times must be strictly increasing")]
    return []


def _value_at(steps: Sequence[tuple], initial, t: float):
    value = initial
    for ts, v in steps:
        if ts <= t:
            value = v
        else:
            break
    return value


@dataclass(frozen=True)
class GridSource:
    """Grid voltage (RMS) and frequency as piecewise-constant profiles.

    Each profile is an initial value plus ``(time, new_value)`` steps. The
    breaker schedule holds ``(time, closed)`` pairs.
    """

    v_g_rms: float
    omega_g: float
    theta_g0: float = 0.0
    connected: bool = True
    v_g_steps: tuple[tuple[float, float], ...] = ()
    omega_g_steps: tuple[tuple[float, float], ...] = ()
    breaker_steps: tuple[tuple[float, bool], ...] = ()

    def v_g_at(self, t: float) -> float:
        return _value_at(self.v_g_steps, self.v_g_rms, t)

    def omega_g_at(self, t: float) -> float:
        return _value_at(self.omega_g_steps, self.omega_g, t)

    def connected_at(self, t: float) -> bool:
        return bool(_value_at(self.breaker_steps, self.connected, t))

    def ever_connected(self) -> bool:
        return self.connected or any(c for _, c in self.breaker_steps)


@dataclass(frozen=True)
class LoadProfile:
    """Resistive load at the point of common coupling.

    ``None`` means the load breaker is open.
    """

    resistance: float | None = None
    steps: tuple[tuple[float, float | None], ...] = ()

    def at(self, t: float) -> float | None:
        return _value_at(self.steps, self.resistance, t)

    def ever_closed(self) -> bool:
        return self.resistance is not None or any(r is not None for _, r in self.steps)


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str


def validate_system(
    setpoints: Setpoints,
    ratings: RatingsAndLimits,
    params: ControllerParams | Iterable[ControllerParams],
    circuit: CircuitParams,
    grid: GridSource | None = None,
    load: LoadProfile | None = None,
) -> list[Violation]:
    """Collect every invariant violation; an empty list means the set is valid."""
    out: list[Violation] = []

    def positive(name: str, value: float, code: str, msg: str) -> None:
        if not (value > 0):
            out.append(Violation(code, name, msg))

    positive("omega_0", setpoints.omega_0, "nonpositive", "omega_0 must be positive")
    positive("v_p0", setpoints.v_p0, "nonpositive", "v_p0 must be positive")
    positive("p_0", ratings.p_0, "nonpositive", "p_0 must be positive")
    positive("q_0", ratings.q_0, "nonpositive", "q_0 must be positive")
    positive("d_omega_max", ratings.d_omega_max, "nonpositive", "d_omega_max must be positive")
    if not ratings.v_p_max > setpoints.v_p0:
        out.append(Violation("degenerate_voltage_range", "v_p_max", "v_p_max must exceed v_p0"))

    if isinstance(params, (AHOParams, EAHOParams, DroopParams)):
        params = [params]
    for p in params:
        for f in fields(p):
            positive(f.name, getattr(p, f.name), "gain_nonpositive", "gain must be positive")

    positive("l_f", circuit.l_f, "nonpositive", "l_f must be positive")
    for name in ("l_g", "r_g", "r_f"):
        if not getattr(circuit, name) >= 0:
            out.append(Violation("negative", name, f"{name} must be non-negative"))

    if grid is not None:
        if grid.v_g_rms < 0 or any(v < 0 for _, v in grid.v_g_steps):
            out.append(Violation("negative", "v_g_rms", "grid voltage must be non-negative"))
        out += _check_steps(grid.breaker_steps, "breaker")
        out += _check_steps(grid.v_g_steps, "v_g_rms")
        out += _check_steps(grid.omega_g_steps, "omega_g")
    if load is not None:
        rs = [load.resistance] + [r for _, r in load.steps]
        if any(r is not None and not r > 0 for r in rs):
            out.append(Violation("nonpositive", "load", "load resistance must be positive"))
        out += _check_steps(load.steps, "load")
    return out


# -- (de)serialization -----------------------------------------------------

def to_dict(obj) -> dict:
    """Plain-dict form of any domain type, tagged with its type name."""
    d = asdict(obj)
    d["type"] = type(obj).__name__
    return d


_TYPES = {
    cls.__name__: cls
    for cls in (
        Setpoints,
        RatingsAndLimits,
        AHOParams,
        EAHOParams,
        DroopParams,
        CircuitParams,
        GridSource,
        LoadProfile,
    )
}


def _tuplify(x):
    if isinstance(x, list):
        return tuple(_tuplify(v) for v in x)
    return x


def from_dict(d: dict):
    d = dict(d)
    cls = _TYPES[d.pop("type")]
    return cls(**{k: _tuplify(v) for k, v in d.items()})


# -- the hardware parameter set --------------------------------------------

TABLE1_V_P0 = 311.0
TABLE1_OMEGA_0 = 2 * math.pi * 50


def table1_setpoints(p_ref: float = 2000.0, q_ref: float = 0.0) -> Setpoints:
    return Setpoints(p_ref=p_ref, q_ref=q_ref, omega_0=TABLE1_OMEGA_0, v_p0=TABLE1_V_P0)


def table1_ratings() -> RatingsAndLimits:
    # +-0.5 Hz and 110 % voltage tolerance
    return RatingsAndLimits(
        p_0=2000.0, q_0=1500.0, d_omega_max=2 * math.pi * 0.5, v_p_max=1.1 * TABLE1_V_P0
    )


def table1_circuit() -> CircuitParams:
    # no R_f is listed for the hardware; 0 keeps R_T = R_g
    return CircuitParams(l_f=7e-3, l_g=1e-3, r_g=1.0, r_f=0.0, c_f=3.9e-6, v_dc=380.0)


TABLE1_PARAMS: dict[str, ControllerParams] = {
    "aho": AHOParams(eta=91.99, mu=1.16e-4),
    "eaho": EAHOParams(eta_e=0.0016, mu_e=1.16e-4),
    "droop": DroopParams(m_p=0.0016, m_q=0.0207, omega_p=20.0, omega_q=20.0),
}

TABLE1_V_G_RMS = 220.0
