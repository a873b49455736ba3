"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 simulation divergence.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, config, runs, tuning
from .emt import kernel
from .emt.simulate import ScenarioError, SimulationDiverged, TimeSeries
from .model import DomainError, EaholabError, table1_ratings

EXIT_CONFIG = 2
EXIT_DIVERGED = 3
DEFAULT_SYSTEM = "table1"


class CliError(EaholabError):
    pass


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


def _plot_series(ts: TimeSeries, out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
    for j in range(1, ts.n_inverters + 1):
        axes[0].plot(ts.t, ts[f"p_{j}"], label=f"P{j}")
        axes[0].plot(ts.t, ts[f"q_{j}"], "--", label=f"Q{j}")
        axes[1].plot(ts.t, ts[f"omega_{j}"] / (2 * math.pi), label=f"f{j}")
        axes[2].plot(ts.t, ts[f"v_p_{j}"], label=f"Vp{j}")
    axes[0].set_ylabel("W, var")
    axes[1].set_ylabel("Hz")
    axes[2].set_ylabel("V")
    axes[2].set_xlabel("t (s)")
    for ax in axes:
        ax.legend(loc="best", fontsize="small")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _system_config(args) -> config.SystemConfig:
    source = DEFAULT_SYSTEM if getattr(args, "table1", False) or not args.config else args.config
    return config.parse_system(config.load(source))


def _factor(text: str, base: float) -> float:
    """``"0.5x"`` scales the base value; a bare number is absolute."""
    t = text.strip().lower()
    try:
        return float(t[:-1]) * base if t.endswith("x") else float(t)
    except ValueError:
        raise CliError(f"bad parameter value {text!r}") from None


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = config.load(args.scenario)
    controllers = None
    if args.pair:
        controllers = config.parse_controllers(args.pair)
    elif args.controller:
        raw = cfg.get("scenario", {}).get("controllers", ["eaho"])
        controllers = (args.controller,) * (len(raw) if isinstance(raw, list) else 1)
    specs = config.build_runs(cfg, controllers)
    if args.decimation is not None:
        specs = [dataclasses.replace(s, decimation=args.decimation) for s in specs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for spec in specs:
        d = out / spec.name if len(specs) > 1 else out
        d.mkdir(parents=True, exist_ok=True)
        try:
            ts = runs.run(spec, args.backend)
        except SimulationDiverged as e:
            e.series.to_csv(d / "timeseries.csv")
            print(f"{spec.name}: {e}", file=sys.stderr)
            status = EXIT_DIVERGED
            continue
        ts.to_csv(d / "timeseries.csv")
        summary = runs.to_jsonable(runs.summarize(spec, ts))
        (d / "metrics.json").write_text(json.dumps(summary, indent=2) + "\n")
        if args.plot:
            _plot_series(ts, d / "timeseries.svg")
        for j, st in summary["steady"].items():
            print(f"{spec.name} {j}: P = {st['p']:.1f} W, Q = {st['q']:.1f} var, "
                  f"f = {st['frequency']:.4f} Hz, Vp = {st['v_p']:.2f} V")
        if "sharing_error_pct" in summary:
            print(f"{spec.name} sharing error: {summary['sharing_error_pct']:.2f} %")
    return status


def _operating_inputs(sc: config.SystemConfig, kind: str, p_ref: float, q_ref: float) -> analysis.OperatingInputs:
    sp = dataclasses.replace(sc.setpoints, p_ref=p_ref, q_ref=q_ref)
    return analysis.OperatingInputs(sc.v_g_rms, sc.setpoints.omega_0, sp, sc.circuit, sc.controller(kind))


def cmd_eigsweep(args) -> int:
    sc = _system_config(args)
    base = _operating_inputs(sc, args.controller, args.p_ref, args.q_ref)
    ref = _current_value(base, args.param)
    lo, hi = _factor(args.start, ref), _factor(args.stop, ref)
    values = np.linspace(lo, hi, args.points)
    pts = analysis.sweep(base, args.param, values, max_workers=args.jobs)
    n = max((len(p.eigenvalues) for p in pts if p.ok), default=0)
    header = [args.param, "ok"] + [f"{c}_lambda_{k + 1}" for k in range(n) for c in ("re", "im")]
    rows = []
    last_stable = None
    for p in pts:
        row = [float(p.value), int(p.ok)]
        if p.ok:
            for lam in p.eigenvalues:
                row += [float(lam.real), float(lam.imag)]
            if np.max(p.eigenvalues.real) < 0:
                last_stable = float(p.value)
        rows.append(row + [float("nan")] * (len(header) - len(row)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "locus.csv", header, rows)
    if last_stable is not None:
        print(f"last stable {args.param} = {last_stable:.6g} ({last_stable / ref:.3f}x)")
    else:
        print("no stable grid point")
    return 0


def _current_value(inputs: analysis.OperatingInputs, name: str) -> float:
    for obj in (inputs.params, inputs.circuit, inputs.setpoints):
        if hasattr(obj, name):
            return float(getattr(obj, name))
    if name in ("v_g", "omega_g"):
        return float(getattr(inputs, name))
    raise CliError(f"unknown parameter {name!r}")


def cmd_design(args) -> int:
    sc = _system_config(args)
    ratings = table1_ratings() if args.table1 else sc.ratings
    sp = dataclasses.replace(sc.setpoints, p_ref=ratings.p_0)
    if args.controller == "eaho":
        rep = tuning.design_with_stability(ratings, sp, sc.circuit, v_g=sc.v_g_rms)
        for line in rep.lines():
            print(line)
        return 0
    if args.controller == "aho":
        p = tuning.design_aho(ratings, sp)
        print(f"eta = {p.eta:.6g} (~{p.eta:.4g})  (frequency limit)")
        print(f"mu  = {p.mu:.6g} (~{p.mu:.3g})  (voltage limit)")
    else:
        p = tuning.design_droop(ratings, sp, sc.params["droop"].omega_p, sc.params["droop"].omega_q)
        print(f"m_p = {p.m_p:.6g} (~{p.m_p:.2g})  (frequency limit)")
        print(f"m_q = {p.m_q:.6g} (~{p.m_q:.3g})  (voltage limit)")
    return 0


def cmd_steady(args) -> int:
    sc = _system_config(args)
    kinds = config.CONTROLLER_KINDS if args.all_controllers else (args.controller,)
    v_g = args.sag * sc.v_g_rms
    rows = []
    for k in kinds:
        ss = analysis.steady_state_large_signal(_operating_inputs(sc, k, args.p_ref, args.q_ref), v_g=v_g)
        rows.append([v_g, k, ss.p, ss.q, ss.v_p, ss.delta])
        print(f"{k:6s} V_g = {v_g:.1f} V  P = {ss.p:9.2f} W  Q = {ss.q:9.2f} var")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "steady.csv", ["v_g", "controller", "p", "q", "v_p", "delta"], rows)
    return 0


def cmd_curve(args) -> int:
    sc = _system_config(args)
    sp = sc.setpoints
    cols = [tuning.droop_curve(sc.params[k], sp, n=args.points) for k in config.CONTROLLER_KINDS]
    rows = [[float(cols[0][i, 0])] + [float(c[i, 1]) for c in cols] for i in range(args.points)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "curve.csv", ["v_p"] + [f"m_p_{k}" for k in config.CONTROLLER_KINDS], rows)
    i0 = int(np.argmin(np.abs(cols[0][:, 0] - sp.v_p0)))
    print(f"m_p at v_p0: aho {cols[0][i0, 1]:.6g}, eaho {cols[1][i0, 1]:.6g}, droop {cols[2][i0, 1]:.6g}")
    return 0


def _run_batch(jobs: list[list[str]], n: int) -> int:
    with ProcessPoolExecutor(max_workers=n) as pool:
        codes = list(pool.map(main, jobs))
    return max(codes, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eaholab", description="Grid-forming oscillator control toolkit")
    ap.add_argument("--backend", choices=sorted(kernel.BACKENDS), default=None,
                    help="integration kernel (default: compiled when available)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a built-in scenario or a TOML config")
    s.add_argument("scenario", nargs="+", help=f"config path or one of: {', '.join(config.builtin_names())}")
    s.add_argument("--controller", choices=config.CONTROLLER_KINDS)
    s.add_argument("--pair", help="two or more controllers joined by '+', e.g. aho+droop")
    s.add_argument("--out", default="out")
    s.add_argument("--decimation", type=int)
    s.add_argument("--plot", action="store_true", help="also write an SVG plot (needs matplotlib)")
    s.add_argument("--jobs", type=int, default=1, help="run several scenarios concurrently")
    s.set_defaults(func=cmd_simulate)

    def analysis_parser(name: str, help_: str):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", nargs="?", help="TOML with a [system] table (default: hardware set)")
        p.add_argument("--table1", action="store_true", help="use the built-in hardware parameter set")
        p.add_argument("--out", default="out")
        p.add_argument("--p-ref", type=float, default=0.0)
        p.add_argument("--q-ref", type=float, default=0.0)
        return p

    e = analysis_parser("eigsweep", "eigenvalue loci over a parameter range")
    e.add_argument("--controller", choices=config.CONTROLLER_KINDS, default="eaho")
    e.add_argument("--param", default="eta_e")
    e.add_argument("--from", dest="start", default="0.5x")
    e.add_argument("--to", dest="stop", default="4x")
    e.add_argument("--points", type=int, default=36)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_eigsweep, p_ref=2000.0)

    d = analysis_parser("design", "gains from the frequency and voltage limits")
    d.add_argument("--controller", choices=config.CONTROLLER_KINDS, default="eaho")
    d.set_defaults(func=cmd_design)

    st = analysis_parser("steady", "large-signal steady (P, Q) under a grid voltage change")
    st.add_argument("--controller", choices=config.CONTROLLER_KINDS, default="eaho")
    st.add_argument("--all-controllers", action="store_true")
    st.add_argument("--sag", type=float, default=1.0, help="grid voltage in pu of the nominal")
    st.set_defaults(func=cmd_steady)

    c = analysis_parser("curve", "effective P-f droop slope versus amplitude")
    c.add_argument("--points", type=int, default=tuning.CURVE_POINTS)
    c.set_defaults(func=cmd_curve)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.backend:
        kernel.use_backend(args.backend)
    try:
        if args.command == "simulate" and len(args.scenario) > 1:
            rest = [a for a in (argv if argv is not None else sys.argv[1:]) if a not in args.scenario]
            jobs = []
            for name in args.scenario:
                j = list(rest)
                j.insert(j.index("simulate") + 1, name)
                o = j.index("--out") if "--out" in j else None
                sub_out = str(Path(args.out) / Path(name).stem)
                if o is None:
                    j += ["--out", sub_out]
                else:
                    j[o + 1] = sub_out
                jobs.append(j)
            return _run_batch(jobs, max(1, args.jobs))
        if args.command == "simulate":
            args.scenario = args.scenario[0]
        return args.func(args)
    except (EaholabError, DomainError, ScenarioError) as e:
        print(f"error: {e}", file=sys.stderr)
        if isinstance(e, (analysis.NoConvergenceError, analysis.NoSynchronizedEquilibrium)):
            return 1
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
