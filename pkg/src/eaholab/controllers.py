"""Control laws of the three grid-forming strategies.

Every function here is pure. Voltages and currents are peak-valued
alpha-beta quantities; the beta axis lags the alpha axis by 90 degrees, so a
steady waveform is ``(V cos(wt), V sin(wt))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import AHOParams, ControllerParams, DomainError, DroopParams, EAHOParams, Setpoints

SOGI_GAIN = math.sqrt(2.0)


class SingularCoefficientError(DomainError):
    """The requested droop coefficient has a pole at this amplitude."""


@dataclass(frozen=True)
class OscState:
    v_alpha: float
    v_beta: float


@dataclass(frozen=True)
class DroopState:
    theta: float
    p_f: float
    q_f: float


@dataclass(frozen=True)
class SogiState:
    x1: float
    x2: float


def amplitude_phase(s: OscState) -> tuple[float, float]:
    """Amplitude and phase in (-pi, pi]; the phase of a zero vector is 0."""
    v_p = math.hypot(s.v_alpha, s.v_beta)
    if v_p == 0.0:
        return 0.0, 0.0
    theta = math.atan2(s.v_beta, s.v_alpha)
    if theta == -math.pi:
        theta = math.pi
    return v_p, theta


def instantaneous_power(v_alpha, v_beta, i_alpha, i_beta) -> tuple[float, float]:
    """Average single-phase (P, Q) from peak-valued orthogonal pairs.

    Works elementwise on numpy arrays too.
    """
    p = 0.5 * (v_alpha * i_alpha + v_beta * i_beta)
    q = 0.5 * (v_beta * i_alpha - v_alpha * i_beta)
    return p, q


def ref_current(s: OscState, sp: Setpoints) -> tuple[float, float]:
    """Current that would make the oscillator deliver exactly (p_ref, q_ref)."""
    vp2 = s.v_alpha**2 + s.v_beta**2
    if vp2 == 0.0:
        raise DomainError("undefined reference current: zero oscillator amplitude")
    i_a = 2.0 * (sp.p_ref * s.v_alpha + sp.q_ref * s.v_beta) / vp2
    i_b = 2.0 * (sp.p_ref * s.v_beta - sp.q_ref * s.v_alpha) / vp2
    return i_a, i_b


def _oscillator(s, i_alpha, i_beta, sp, mu, current_gain):
    i_ar, i_br = ref_current(s, sp)
    va, vb = s.v_alpha, s.v_beta
    amp = mu * (sp.v_p0**2 - (va * va + vb * vb))
    ea = i_ar - i_alpha
    eb = i_br - i_beta
    dva = amp * va - sp.omega_0 * vb - current_gain * eb
    dvb = sp.omega_0 * va + amp * vb + current_gain * ea
    return dva, dvb


def aho_derivative(s: OscState, i_alpha, i_beta, sp: Setpoints, p: AHOParams):
    """Right-hand side of the conventional oscillator in Cartesian form."""
    return _oscillator(s, i_alpha, i_beta, sp, p.mu, p.eta)


def eaho_derivative(s: OscState, i_alpha, i_beta, sp: Setpoints, p: EAHOParams):
    """Like :func:`aho_derivative` but the current error is scaled by v_p**2/2."""
    vp2 = s.v_alpha**2 + s.v_beta**2
    return _oscillator(s, i_alpha, i_beta, sp, p.mu_e, p.eta_e * 0.5 * vp2)


def polar_dynamics(params: ControllerParams, v_p, p, q, sp: Setpoints) -> tuple[float, float]:
    """Amplitude derivative and instantaneous frequency of an oscillator.

    Returns ``(dv_p/dt, omega)``.
    """
    if not v_p > 0:
        raise DomainError(f"amplitude must be positive, got {v_p}")
    if isinstance(params, AHOParams):
        dvp = params.mu * (sp.v_p0**2 - v_p**2) * v_p + 2 * params.eta / v_p * (sp.q_ref - q)
        omega = sp.omega_0 + 2 * params.eta / v_p**2 * (sp.p_ref - p)
    elif isinstance(params, EAHOParams):
        dvp = params.mu_e * (sp.v_p0**2 - v_p**2) * v_p + params.eta_e * v_p * (sp.q_ref - q)
        omega = sp.omega_0 + params.eta_e * (sp.p_ref - p)
    else:
        raise TypeError(f"no polar form for {type(params).__name__}")
    return dvp, omega


def droop_derivative(s: DroopState, p, q, sp: Setpoints, params: DroopParams):
    """Phase/filter derivatives and the commanded output voltage.

    Returns ``((dtheta, dp_f, dq_f), (v_alpha, v_beta))``.
    """
    dtheta = sp.omega_0 + params.m_p * (sp.p_ref - s.p_f)
    dp_f = params.omega_p * (p - s.p_f)
    dq_f = params.omega_q * (q - s.q_f)
    v_p = droop_amplitude(s, sp, params)
    return (dtheta, dp_f, dq_f), (v_p * math.cos(s.theta), v_p * math.sin(s.theta))


def droop_amplitude(s: DroopState, sp: Setpoints, params: DroopParams) -> float:
    return sp.v_p0 + params.m_q * (sp.q_ref - s.q_f)


def sogi_derivative(s: SogiState, u, omega, k=SOGI_GAIN) -> tuple[float, float]:
    """Quadrature signal generator; x2 is u delayed by a quarter period."""
    if not omega > 0:
        raise DomainError(f"SOGI resonant frequency must be positive, got {omega}")
    return omega * (k * (u - s.x1) - s.x2), omega * s.x1


def droop_coefficients(params: ControllerParams, v_p: float, sp: Setpoints) -> tuple[float, float]:
    """Effective (m_p, m_q) at amplitude ``v_p``.

    For the conventional oscillator m_q is the slope of its steady V-Q curve,
    ``eta / (mu v_p (2 v_p^2 - v_p0^2))``, which changes sign at
    ``v_p0/sqrt(2)``.
    """
    if not v_p > 0:
        raise DomainError(f"amplitude must be positive, got {v_p}")
    if isinstance(params, AHOParams):
        m_p = 2 * params.eta / v_p**2
        den = params.mu * v_p * (2 * v_p**2 - sp.v_p0**2)
        if abs(2 * v_p**2 - sp.v_p0**2) <= 1e-12 * sp.v_p0**2:
            raise SingularCoefficientError("singular coefficient: v_p = v_p0/sqrt(2)")
        return m_p, params.eta / den
    if isinstance(params, EAHOParams):
        return params.eta_e, params.eta_e / (2 * params.mu_e * v_p)
    if isinstance(params, DroopParams):
        return params.m_p, params.m_q
    raise TypeError(f"unknown controller {type(params).__name__}")
