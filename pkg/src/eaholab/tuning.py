"""Gain design from frequency and voltage limits, with a small-signal check."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    NoInstabilityInBracket,
    OperatingInputs,
    critical_gain,
    max_real_part,
)
from .controllers import droop_coefficients
from .model import (
    AHOParams,
    CircuitParams,
    ControllerParams,
    DomainError,
    DroopParams,
    EaholabError,
    EAHOParams,
    RatingsAndLimits,
    Setpoints,
    peak_to_rms,
)

SAFETY_FACTOR = 0.95
CURVE_POINTS = 200
CURVE_RANGE = (0.5, 1.2)
MU_E_CONDITION = "0 < mu_e, always satisfied"


class InfeasibleDesignError(EaholabError):
    pass


def _check_range(ratings: RatingsAndLimits, sp: Setpoints) -> None:
    if not ratings.v_p_max > sp.v_p0:
        raise DomainError("degenerate voltage range: v_p_max must exceed v_p0")


def design_aho(ratings: RatingsAndLimits, sp: Setpoints) -> AHOParams:
    """Gains that put the rated (P, Q) exactly on the frequency and voltage limits."""
    _check_range(ratings, sp)
    vm2 = ratings.v_p_max**2
    eta = ratings.d_omega_max * vm2 / (2 * ratings.p_0)
    mu = 2 * eta * ratings.q_0 / (vm2 * vm2 - sp.v_p0**2 * vm2)
    return AHOParams(eta=eta, mu=mu)


def design_eaho(ratings: RatingsAndLimits, sp: Setpoints) -> EAHOParams:
    _check_range(ratings, sp)
    eta_e = ratings.d_omega_max / ratings.p_0
    mu_e = eta_e * ratings.q_0 / (ratings.v_p_max**2 - sp.v_p0**2)
    return EAHOParams(eta_e=eta_e, mu_e=mu_e)


def design_droop(ratings: RatingsAndLimits, sp: Setpoints, omega_p: float = 20.0,
                 omega_q: float = 20.0) -> DroopParams:
    """Linear droop slopes; the filter corners are passed through unchanged."""
    _check_range(ratings, sp)
    return DroopParams(
        m_p=ratings.d_omega_max / ratings.p_0,
        m_q=(ratings.v_p_max - sp.v_p0) / ratings.q_0,
        omega_p=omega_p,
        omega_q=omega_q,
    )


@dataclass(frozen=True)
class DesignReport:
    """Outcome of :func:`design_with_stability`.

    ``binding`` names the limit that fixed each gain ("frequency", "voltage"
    or "stability"). ``critical`` is the smallest destabilizing eta_e found
    (inf if none was found below the search cap).
    """

    params: EAHOParams
    designed: EAHOParams
    binding: dict = field(default_factory=dict)
    curtailed: bool = False
    critical: float = math.inf
    safety_factor: float = SAFETY_FACTOR
    mu_e_condition: str = MU_E_CONDITION

    @property
    def status(self) -> str:
        return "curtailed" if self.curtailed else "pass"

    def lines(self) -> list[str]:
        p = self.params
        out = [
            f"eta_e = {p.eta_e:.6g} (~{p.eta_e:.2g})  ({self.binding['eta_e']} limit)",
            f"mu_e  = {p.mu_e:.6g} (~{p.mu_e:.3g})  ({self.binding['mu_e']} limit)",
            f"critical eta_e = {self.critical:.6g}",
            f"stability: {self.status}",
            self.mu_e_condition,
        ]
        if self.curtailed:
            out.insert(3, f"designed eta_e {self.designed.eta_e:.6g} curtailed to "
                          f"{self.safety_factor} x critical")
        return out


def design_with_stability(
    ratings: RatingsAndLimits,
    sp: Setpoints,
    circuit: CircuitParams,
    v_g: float | None = None,
    omega_g: float | None = None,
    max_factor: float = 64.0,
) -> DesignReport:
    """EAHO design followed by a small-signal stability check on ``eta_e``.

    The system is linearized around the operating point given by ``sp``
    against a grid of RMS voltage ``v_g`` (nominal by default). If the
    designed ``eta_e`` is not below the critical gain it is reduced to
    ``SAFETY_FACTOR`` times that gain.
    """
    designed = design_eaho(ratings, sp)
    v_g = peak_to_rms(sp.v_p0) if v_g is None else v_g
    omega_g = sp.omega_0 if omega_g is None else omega_g
    base = OperatingInputs(v_g, omega_g, sp, circuit, designed)

    def g(eta_e: float) -> float:
        return max_real_part(base, "eta_e", eta_e)

    # geometric scan for a stable lower end and an unstable upper end
    lo = designed.eta_e
    for _ in range(12):
        if g(lo) < 0:
            break
        lo /= 2
    else:
        raise InfeasibleDesignError("infeasible design: no stable equilibrium at any tested gain")
    hi = max(lo, designed.eta_e) * 2
    while g(hi) < 0 and hi < max_factor * designed.eta_e:
        lo, hi = hi, hi * 2
    try:
        crit = critical_gain(base, "eta_e", (lo, hi))
    except NoInstabilityInBracket:
        crit = math.inf

    binding = {"eta_e": "frequency", "mu_e": "voltage"}
    if designed.eta_e < crit:
        return DesignReport(designed, designed, binding, False, crit)
    binding["eta_e"] = "stability"
    params = EAHOParams(eta_e=SAFETY_FACTOR * crit, mu_e=designed.mu_e)
    return DesignReport(params, designed, binding, True, crit)


def droop_curve(params: ControllerParams, sp: Setpoints, v_range: tuple[float, float] | None = None,
                n: int = CURVE_POINTS) -> np.ndarray:
    """Effective P-f slope over a range of amplitudes, as an ``(n, 2)`` table."""
    if v_range is None:
        v_range = (CURVE_RANGE[0] * sp.v_p0, CURVE_RANGE[1] * sp.v_p0)
    a, b = v_range
    if not (0 < a <= b <= 2 * sp.v_p0):
        raise DomainError("curve range must lie within (0, 2 v_p0]")
    v = np.linspace(a, b, n)
    m_p = np.array([droop_coefficients(params, float(x), sp)[0] for x in v])
    return np.column_stack([v, m_p])
