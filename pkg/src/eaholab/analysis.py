"""Reduced dq-frame model of one inverter on an inductive grid.

The frame rotates with the grid voltage, so the grid voltage is the real
constant ``v_g`` and the inverter voltage is ``v * exp(j theta)``. All
voltages and currents in this module are RMS; the controller laws are
written for peak amplitudes and every conversion goes through
:func:`~eaholab.model.rms_to_peak` / :func:`~eaholab.model.peak_to_rms`.

State vectors::

    aho, eaho : [v, theta, i_d, i_q]
    droop     : [v, theta, omega, i_d, i_q]
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .controllers import polar_dynamics
from .model import (
    SQRT2,
    AHOParams,
    CircuitParams,
    ControllerParams,
    DomainError,
    DroopParams,
    EaholabError,
    EAHOParams,
    Setpoints,
    peak_to_rms,
    rms_to_peak,
)


class NoConvergenceError(EaholabError):
    pass


class EigenError(EaholabError):
    pass


class NoInstabilityInBracket(EaholabError):
    pass


class NoSynchronizedEquilibrium(EaholabError):
    pass


STATE_LABELS = {
    "aho": ("v", "theta", "i_d", "i_q"),
    "eaho": ("v", "theta", "i_d", "i_q"),
    "droop": ("v", "theta", "omega", "i_d", "i_q"),
}


@dataclass(frozen=True)
class OperatingInputs:
    """Everything the reduced model needs besides the state.

    ``v_g`` is the grid RMS voltage.
    """

    v_g: float
    omega_g: float
    setpoints: Setpoints
    circuit: CircuitParams
    params: ControllerParams

    @property
    def kind(self) -> str:
        return self.params.kind


@dataclass(frozen=True)
class SmallSignalModel:
    equilibrium: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    labels: tuple[str, ...]
    inputs: OperatingInputs

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @property
    def stable(self) -> bool:
        return self.max_real < 0


def _powers(v, theta, i_d, i_q):
    c, s = math.cos(theta), math.sin(theta)
    return v * (c * i_d + s * i_q), v * (s * i_d - c * i_q)


def reduced_dynamics(x: Sequence[float], inputs: OperatingInputs) -> np.ndarray:
    """Time derivative of the reduced state."""
    kind = inputs.kind
    sp, ckt, prm = inputs.setpoints, inputs.circuit, inputs.params
    v, theta = x[0], x[1]
    if not v > 0:
        raise DomainError(f"voltage state must be positive, got {v}")
    if kind == "droop":
        omega, i_d, i_q = x[2], x[3], x[4]
    else:
        i_d, i_q = x[2], x[3]
        omega = inputs.omega_g
    p, q = _powers(v, theta, i_d, i_q)
    lt, rt = ckt.l_t, ckt.r_t
    di_d = -rt / lt * i_d + omega * i_q + (v * math.cos(theta) - inputs.v_g) / lt
    di_q = -omega * i_d - rt / lt * i_q + v * math.sin(theta) / lt

    if kind == "droop":
        # amplitude law v_p = v_p0 + m_q (q_ref - q_f) rewritten for the RMS state
        dv = -prm.omega_q * (v - peak_to_rms(sp.v_p0)) - prm.m_q * prm.omega_q * (q - sp.q_ref) / SQRT2
        domega = -prm.omega_p * (omega - sp.omega_0) - prm.m_p * prm.omega_p * (p - sp.p_ref)
        return np.array([dv, omega - inputs.omega_g, domega, di_d, di_q])

    dvp, w = polar_dynamics(prm, rms_to_peak(v), p, q, sp)
    return np.array([peak_to_rms(dvp), w - inputs.omega_g, di_d, di_q])


def jacobian_numeric(x_eq: Sequence[float], inputs: OperatingInputs, f: Callable | None = None) -> np.ndarray:
    """Central-difference Jacobian, step ``max(1e-6, 1e-6 |x_j|)`` per component."""
    f = f or (lambda z: reduced_dynamics(z, inputs))
    x = np.asarray(x_eq, dtype=float)
    n = x.size
    cols = []
    for j in range(n):
        h = max(1e-6, 1e-6 * abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def jacobian_analytic(x_eq: Sequence[float], inputs: OperatingInputs) -> np.ndarray:
    """Closed-form Jacobian of :func:`reduced_dynamics`."""
    kind = inputs.kind
    sp, ckt, prm = inputs.setpoints, inputs.circuit, inputs.params
    v, th = x_eq[0], x_eq[1]
    if kind == "droop":
        w, i_d, i_q = x_eq[2], x_eq[3], x_eq[4]
    else:
        i_d, i_q = x_eq[2], x_eq[3]
        w = inputs.omega_g
    c, s = math.cos(th), math.sin(th)
    f1 = i_d * c + i_q * s
    f2 = i_d * s - i_q * c
    p, q = v * f1, v * f2
    lt, rt = ckt.l_t, ckt.r_t
    # rows of d(P)/dx and d(Q)/dx over (v, theta, i_d, i_q)
    dp = (f1, -v * f2, v * c, v * s)
    dq = (f2, v * f1, v * s, -v * c)
    row_id = [c / lt, -v * s / lt, -rt / lt, w]
    row_iq = [s / lt, v * c / lt, -w, -rt / lt]

    if kind == "eaho":
        eta, mu = prm.eta_e, prm.mu_e
        v0 = peak_to_rms(sp.v_p0)
        return np.array(
            [
                [2 * mu * (v0**2 - 3 * v**2) + eta * sp.q_ref - 2 * eta * v * f2,
                 -eta * v**2 * f1, -eta * v**2 * s, eta * v**2 * c],
                [-eta * f1, eta * v * f2, -eta * v * c, -eta * v * s],
                row_id,
                row_iq,
            ]
        )
    if kind == "aho":
        eta, mu = prm.eta, prm.mu
        # v' = mu (v_p0^2 - 2 v^2) v + (eta / v)(q_ref - Q);  theta' = eta / v^2 (p_ref - P) + const
        r1 = [mu * (sp.v_p0**2 - 6 * v**2) - eta / v**2 * (sp.q_ref - q) - eta / v * dq[0]]
        r1 += [-eta / v * d for d in dq[1:]]
        r2 = [-2 * eta / v**3 * (sp.p_ref - p) - eta / v**2 * dp[0]]
        r2 += [-eta / v**2 * d for d in dp[1:]]
        return np.array([r1, r2, row_id, row_iq])
    if kind == "droop":
        kq = prm.m_q * prm.omega_q / SQRT2
        kp = prm.m_p * prm.omega_p
        r1 = [-prm.omega_q - kq * dq[0], -kq * dq[1], 0.0, -kq * dq[2], -kq * dq[3]]
        r2 = [0.0, 0.0, 1.0, 0.0, 0.0]
        r3 = [-kp * dp[0], -kp * dp[1], -prm.omega_p, -kp * dp[2], -kp * dp[3]]
        r4 = row_id[:2] + [i_q] + row_id[2:]
        r5 = row_iq[:2] + [-i_d] + row_iq[2:]
        return np.array([r1, r2, r3, r4, r5])
    raise TypeError(kind)


def newton(
    f: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-8,
    max_iter: int = 50,
    max_halvings: int = 6,
    admissible: Callable[[np.ndarray], bool] = lambda x: True,
) -> np.ndarray:
    """Damped Newton iteration on ``f(x) = 0`` with an infinity-norm test.

    The step is halved (up to ``max_halvings`` times) whenever the residual
    does not decrease or the iterate leaves the admissible set.
    """
    jac = jac or (lambda z: jacobian_numeric(z, None, f))
    x = np.asarray(x0, dtype=float)
    r = np.asarray(f(x))
    norm = np.max(np.abs(r))
    for _ in range(max_iter):
        if norm < tol:
            return x
        try:
            step = np.linalg.solve(jac(x), -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError("singular Newton step") from exc
        if not np.all(np.isfinite(step)):
            raise NoConvergenceError("singular Newton step")
        lam = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + lam * step
            if admissible(x_new):
                try:
                    r_new = np.asarray(f(x_new))
                except DomainError:
                    r_new = None
                if r_new is not None and np.max(np.abs(r_new)) < norm:
                    break
            lam *= 0.5
        else:
            if not admissible(x_new) or r_new is None:
                raise NoConvergenceError("iterate left the admissible region")
        x, r = x_new, r_new
        norm = np.max(np.abs(r))
    if norm < tol:
        return x
    raise NoConvergenceError(f"no convergence after {max_iter} iterations (residual {norm:.3e})")


def default_guess(inputs: OperatingInputs) -> np.ndarray:
    v = peak_to_rms(inputs.setpoints.v_p0)
    i_d = inputs.setpoints.p_ref / max(inputs.v_g, 1.0)
    x = [v, 0.0, i_d, 0.0]
    if inputs.kind == "droop":
        x.insert(2, inputs.omega_g)
    return np.array(x)


def find_equilibrium(inputs: OperatingInputs, guess: Sequence[float] | None = None, tol: float = 1e-8) -> np.ndarray:
    """Equilibrium of the reduced model by damped Newton iteration."""
    x0 = default_guess(inputs) if guess is None else np.asarray(guess, dtype=float)
    if not x0[0] > 0:
        raise DomainError("initial guess must have positive voltage")
    return newton(
        lambda z: reduced_dynamics(z, inputs),
        x0,
        tol=tol,
        admissible=lambda z: z[0] > 0,
    )


def eigenvalues(a: np.ndarray, check_tol: float = 1e-8) -> np.ndarray:
    """Eigenvalues of a small real matrix, conjugate pairs adjacent.

    Sorted by decreasing real part; within a pair the positive imaginary
    part comes first. Each eigenvalue is checked by the relative smallest
    singular value of ``A - lambda I``.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > 8:
        raise ValueError("eigenvalue routine is limited to 8x8 matrices")
    try:
        lam = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenError("eigen non-convergence") from exc
    scale = max(np.linalg.norm(a, 2), 1.0)
    for z in lam:
        smin = np.linalg.svd(a - z * np.eye(n), compute_uv=False)[-1]
        if smin > check_tol * scale:
            raise EigenError(f"eigen non-convergence: residual {smin / scale:.2e} at {z}")
    lam = np.where(np.abs(lam.imag) <= 1e-12 * scale, lam.real + 0j, lam)
    return np.array(sorted(lam, key=lambda z: (-round(z.real, 9), -z.imag)))


def small_signal(inputs: OperatingInputs, guess: Sequence[float] | None = None, analytic: bool = True) -> SmallSignalModel:
    x = find_equilibrium(inputs, guess)
    a = jacobian_analytic(x, inputs) if analytic else jacobian_numeric(x, inputs)
    return SmallSignalModel(x, a, eigenvalues(a), STATE_LABELS[inputs.kind], inputs)


# -- parameter studies ------------------------------------------------------

_PARAM_FIELDS = {
    "params": ("eta", "mu", "eta_e", "mu_e", "m_p", "m_q", "omega_p", "omega_q"),
    "circuit": ("l_f", "l_g", "r_f", "r_g"),
    "setpoints": ("p_ref", "q_ref", "omega_0", "v_p0"),
}


def with_parameter(inputs: OperatingInputs, name: str, value: float) -> OperatingInputs:
    """Copy of ``inputs`` with one named scalar replaced."""
    if name in ("v_g", "omega_g"):
        return replace(inputs, **{name: value})
    for group, names in _PARAM_FIELDS.items():
        if name in names:
            obj = getattr(inputs, group)
            if not hasattr(obj, name):
                break
            return replace(inputs, **{group: replace(obj, **{name: value})})
    raise KeyError(f"unknown parameter {name!r} for {inputs.kind}")


@dataclass(frozen=True)
class SweepPoint:
    value: float
    eigenvalues: np.ndarray | None
    equilibrium: np.ndarray | None

    @property
    def ok(self) -> bool:
        return self.eigenvalues is not None


def _sweep_one(args):
    inputs, name, value, guess = args
    try:
        m = small_signal(with_parameter(inputs, name, value), guess)
    except (NoConvergenceError, EigenError, DomainError):
        return SweepPoint(value, None, None)
    return SweepPoint(value, m.eigenvalues, m.equilibrium)


def sweep(
    inputs: OperatingInputs, name: str, values: Sequence[float], max_workers: int | None = None
) -> list[SweepPoint]:
    """Eigenvalues along a parameter grid; failed points come back flagged."""
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers) as pool:
            return list(pool.map(_sweep_one, [(inputs, name, v, None) for v in values]))
    out = []
    guess = None
    for v in values:
        pt = _sweep_one((inputs, name, v, guess))
        if not pt.ok and guess is not None:
            pt = _sweep_one((inputs, name, v, None))
        out.append(pt)
        if pt.ok:
            guess = pt.equilibrium
    return out


def max_real_part(inputs: OperatingInputs, name: str, value: float) -> float:
    """Largest eigenvalue real part; a missing equilibrium counts as unstable."""
    pt = _sweep_one((inputs, name, value, None))
    return float(np.max(pt.eigenvalues.real)) if pt.ok else math.inf


def bisect_sign_change(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-5) -> float:
    glo, ghi = g(lo), g(hi)
    if not (glo < 0 <= ghi):
        raise NoInstabilityInBracket(f"no instability in bracket [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_gain(inputs: OperatingInputs, name: str, bracket: tuple[float, float], tol: float = 1e-5) -> float:
    """Smallest parameter value in ``bracket`` where stability is lost."""
    return bisect_sign_change(lambda v: max_real_part(inputs, name, v), *bracket, tol=tol)


# -- large-signal steady state ---------------------------------------------

@dataclass(frozen=True)
class SteadyState:
    v_p: float
    delta: float
    p: float
    q: float
    stable: bool | None = None


def circuit_powers(v_p: float, delta: float, v_gp: float, r_t: float, x_t: float) -> tuple[float, float]:
    """Inverter output powers through an R-L branch from peak phasors."""
    den = 2 * (r_t**2 + x_t**2)
    a = v_p**2 - v_p * v_gp * math.cos(delta)
    b = v_p * v_gp * math.sin(delta)
    return (r_t * a + x_t * b) / den, (x_t * a - r_t * b) / den


def steady_state_large_signal(inputs: OperatingInputs, v_g: float | None = None, verify: bool = True) -> SteadyState:
    """Synchronised steady state from the controller's steady laws and the
    algebraic branch-power relations.

    ``v_g`` (RMS) overrides ``inputs.v_g``. Only the branch with
    ``|delta| < pi/2`` is accepted; with ``verify`` the result is also
    classified by the eigenvalues of the reduced model.
    """
    if v_g is not None:
        inputs = replace(inputs, v_g=v_g)
    if not inputs.v_g > 0:
        raise DomainError("grid voltage must be positive")
    sp, prm, ckt = inputs.setpoints, inputs.params, inputs.circuit
    v_gp = rms_to_peak(inputs.v_g)
    r_t, x_t = ckt.r_t, ckt.x_t(inputs.omega_g)
    dw = inputs.omega_g - sp.omega_0

    def residual(z):
        v_p, delta = z
        p, q = circuit_powers(v_p, delta, v_gp, r_t, x_t)
        if isinstance(prm, DroopParams):
            return np.array([v_p - sp.v_p0 - prm.m_q * (sp.q_ref - q),
                             prm.m_p * (sp.p_ref - p) - dw])
        dvp, w = polar_dynamics(prm, v_p, p, q, sp)
        return np.array([dvp, w - inputs.omega_g])

    try:
        z = newton(residual, [sp.v_p0, 0.0], admissible=lambda z: z[0] > 0 and abs(z[1]) < math.pi / 2)
    except NoConvergenceError as exc:
        raise NoSynchronizedEquilibrium(str(exc)) from exc
    v_p, delta = float(z[0]), float(z[1])
    p, q = circuit_powers(v_p, delta, v_gp, r_t, x_t)
    stable = None
    if verify:
        stable = _classify_large_signal(inputs, v_p, delta)
    return SteadyState(v_p, delta, p, q, stable)


def _classify_large_signal(inputs: OperatingInputs, v_p: float, delta: float) -> bool | None:
    ckt = inputs.circuit
    v = peak_to_rms(v_p)
    # branch current phasor (RMS) in the grid frame
    z = complex(ckt.r_t, ckt.x_t(inputs.omega_g))
    i = (v * complex(math.cos(delta), math.sin(delta)) - inputs.v_g) / z
    guess = [v, delta, i.real, i.imag]
    if inputs.kind == "droop":
        guess.insert(2, inputs.omega_g)
    try:
        return small_signal(inputs, guess).stable
    except (NoConvergenceError, EigenError, DomainError):
        return None
