"""Run resolved scenarios and condense the records into summary metrics."""
from __future__ import annotations

import math

import numpy as np

from .config import RunSpec
from .emt.metrics import NotSettledError, overshoot, settling_time, sharing_error, steady_mean
from .emt.simulate import TimeSeries, simulate

MIN_STEP = 1.0  # W; smaller reference changes get no transient figures


def run(spec: RunSpec, backend: str | None = None) -> TimeSeries:
    return simulate(spec.system, spec.scenario, spec.decimation, backend)


def _window_mean(ts: TimeSeries, name: str, t_end: float, f: float, cycles: int = 10) -> float:
    m = ts.window(t_end - cycles / f, t_end)
    return float(ts[name][m].mean())


def summarize(spec: RunSpec, ts: TimeSeries) -> dict:
    """Steady powers, per-event transient figures and sharing errors."""
    n = spec.system.n_inverters
    f0 = spec.system.inverters[0].setpoints.omega_0 / (2 * math.pi)
    end = float(ts.t[-1])
    out: dict = {"name": spec.name, "controllers": list(spec.controllers), "t_end": end}

    steady = {}
    for j in range(1, n + 1):
        steady[f"inverter_{j}"] = {
            "p": steady_mean(ts.t, ts[f"p_{j}"], f0),
            "q": steady_mean(ts.t, ts[f"q_{j}"], f0),
            "v_p": steady_mean(ts.t, ts[f"v_p_{j}"], f0),
            "frequency": steady_mean(ts.t, ts[f"omega_{j}"], f0) / (2 * math.pi),
        }
    out["steady"] = steady
    if n >= 2:
        out["sharing_error_pct"] = sharing_error(steady["inverter_1"]["p"], steady["inverter_2"]["p"])

    times = sorted({e.t for e in ts.events if 0 < e.t < end})
    events = []
    for k, te in enumerate(times):
        tn = times[k + 1] if k + 1 < len(times) else end + 1e-12
        rec: dict = {"t": te, "kinds": sorted({e.kind for e in ts.events if e.t == te})}
        for j in range(1, n + 1):
            ch = f"p_ctrl_{j}"
            before = _window_mean(ts, ch, te, f0)
            after = _window_mean(ts, ch, tn, f0)
            r = {"p_before": before, "p_after": after,
                 "q_after": _window_mean(ts, f"q_{j}", tn, f0)}
            if abs(after - before) >= MIN_STEP:
                seg = ts.window(te, tn)
                try:
                    r["settling_time"] = settling_time(ts.t[seg], ts[ch][seg], after, t_event=te, initial=before)
                except NotSettledError:
                    r["settling_time"] = None
                r["overshoot_pct"] = overshoot(ts[ch][seg], before, after)
            rec[f"inverter_{j}"] = r
        if n >= 2:
            rec["sharing_error_pct"] = sharing_error(rec["inverter_1"]["p_after"], rec["inverter_2"]["p_after"])
        events.append(rec)
    out["events"] = events

    if spec.scenario.init == "startup":
        first = times[0] if times else end + 1e-12
        rise = {}
        for j in range(1, n + 1):
            target = _window_mean(ts, f"v_p_{j}", first, f0)
            try:
                rise[f"inverter_{j}"] = settling_time(ts.t, ts[f"v_p_{j}"], target, t_event=0.0)
            except NotSettledError:
                rise[f"inverter_{j}"] = None
        out["voltage_build_up_time"] = rise
    return out


def to_jsonable(x):
    if isinstance(x, dict):
        return {k: to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x
