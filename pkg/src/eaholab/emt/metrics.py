"""Transient and steady-state figures of merit for logged channels."""
from __future__ import annotations

import numpy as np

from ..model import EaholabError


class NotSettledError(EaholabError):
    pass


def settling_time(t, y, target: float, band: float = 0.02, t_event: float | None = None,
                  initial: float | None = None) -> float:
    """Time after ``t_event`` at which ``y`` last leaves the band around ``target``.

    The band half-width is ``band * |target - initial|``; ``initial`` defaults
    to the first sample at or after the event.

    Raises
    ------
    NotSettledError
        If the last sample is still outside the band.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty channel")
    t_event = t[0] if t_event is None else t_event
    m = t >= t_event - 1e-12
    t, y = t[m], y[m]
    if y.size == 0:
        raise ValueError("no samples after the event")
    initial = y[0] if initial is None else initial
    width = band * abs(target - initial)
    outside = np.abs(y - target) > width
    if not outside.any():
        return 0.0
    last = int(np.flatnonzero(outside)[-1])
    if last == y.size - 1:
        raise NotSettledError("not settled within the record")
    return float(t[last + 1] - t_event)


def overshoot(y, initial: float, target: float) -> float:
    """Peak excursion beyond ``target`` as a percentage of the step size."""
    y = np.asarray(y, dtype=float)
    step = target - initial
    if step == 0:
        raise ValueError("target must differ from initial")
    peak = y.max() if step > 0 else y.min()
    return max((peak - target) / step, 0.0) * 100.0


def steady_mean(t, y, f: float = 50.0, cycles: int = 10) -> float:
    """Mean over the last ``cycles`` periods of frequency ``f``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    m = t >= t[-1] - cycles / f + 1e-12
    return float(y[m].mean())


def sharing_error(p1: float, p2: float) -> float:
    """Relative mismatch between two inverter powers, in percent of their mean."""
    mean = 0.5 * (p1 + p2)
    return abs(p1 - p2) / abs(mean) * 100.0
