"""Command-line entry point.

Subcommands:

* ``run``      -- classify, integrate, post-process, write all artifacts
* ``aperture`` -- aperture of a scenario's initial metric, sample table CSV
* ``classify`` -- existence classification of the initial data
* ``verify``   -- re-run every pure check on a finished output directory
* ``fit``      -- re-fit decay windows on a stored monitor series

Exit codes: 0 success/PASS, 2 flatness FAIL, 1 error.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import SimulationError
from .flow import classify_global_existence, run_flow
from .grid import ScalarField, ConformalField, write_snapshot, read_snapshot
from .geometry import aperture
from .report import analyze_run, flatness_applicable
from .scenarios import load_config
from .series import TimeSeries, read_pair_csv, write_pair_csv
from .diagnostics import fit_decay
from .errors import WindowTooShort


def _apply_overrides(scenario, args):
    solver = scenario.solver
    changes = {}
    if getattr(args, "t_end", None) is not None:
        changes["t_end"] = args.t_end
    if getattr(args, "scheme", None) is not None:
        changes["scheme"] = args.scheme
    if changes:
        scenario.solver = replace(solver, **changes)
    if getattr(args, "grid_n", None) is not None:
        from dataclasses import replace as _rep

        scenario.grid = _rep(scenario.grid, n=args.grid_n)
    return scenario


def _write_run_outputs(out_dir, scenario, config_text, result, analysis):
    os.makedirs(out_dir, exist_ok=True)
    snapdir = os.path.join(out_dir, "snapshots")
    rescdir = os.path.join(out_dir, "rescaled_snapshots")
    os.makedirs(snapdir, exist_ok=True)
    os.makedirs(rescdir, exist_ok=True)
    outputs = []

    def track(rel):
        outputs.append(rel)
        return os.path.join(out_dir, rel)

    with open(track("config_echo.ini"), "w") as fh:
        fh.write(config_text)
    result.series.write_csv(track("timeseries.csv"))
    t = result.series.t
    write_pair_csv(track("identity_residual.csv"), "t", t,
                   "residual", result.series.column("identity_residual"))
    write_pair_csv(track("equivalence_defect.csv"), "t", t,
                   "defect", result.series.column("defect"))

    grid = scenario.grid
    write_snapshot(track("snapshots/u0.txt"),
                   ScalarField(grid, result.u0), 0.0, "u0")
    write_snapshot(track("snapshots/f0.txt"),
                   ScalarField(grid, result.f0), 0.0, "f0")
    for i, (ti, (u, f, psi)) in enumerate(
        zip(result.snapshot_times, result.snapshots)
    ):
        for nm, arr in (("u", u), ("f", f), ("psi", psi)):
            write_snapshot(track(f"snapshots/{nm}_{i:04d}.txt"),
                           ScalarField(grid, arr), ti, nm)
    if analysis is not None:
        for i, r in enumerate(analysis.rescaled):
            if r is None:
                continue
            write_snapshot(track(f"rescaled_snapshots/uhat_{i:04d}.txt"),
                           r.u_hat, r.t, "uhat")
        with open(track("flatness_report.json"), "w") as fh:
            fh.write(analysis.flatness.to_json() + "\n")
    return outputs


def _write_manifest(out_dir, config_text, outputs, verdicts, t_start, t_end_wall):
    manifest = {
        "scenario_hash": hashlib.sha256(config_text.encode()).hexdigest(),
        "tool_version": __version__,
        "start_walltime": t_start,
        "end_walltime": t_end_wall,
        "outputs": sorted(outputs),
        "verdicts": verdicts,
        "config_echo": config_text,
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def cmd_run(args) -> int:
    with open(args.config) as fh:
        config_text = fh.read()
    scenario = _apply_overrides(load_config(args.config), args)
    t_start = time.time()
    result = run_flow(scenario, allow_extinction=args.allow_extinction)
    verdicts = {"existence": result.verdict.verdict}
    analysis = None
    if flatness_applicable(result):
        analysis = analyze_run(result)
        verdicts["flatness"] = analysis.flatness.verdict
        if analysis.flatness.violated:
            verdicts["flatness_violated"] = analysis.flatness.violated
    else:
        verdicts["flatness"] = "NOT-EVALUATED"
        verdicts["area_slope"] = result.area_slope()
        if result.stopped:
            verdicts["stopped"] = {"code": result.stopped[0], "t": result.stopped[1]}
    outputs = _write_run_outputs(args.out, scenario, config_text, result, analysis)
    _write_manifest(args.out, config_text, outputs + ["manifest.json"],
                    verdicts, t_start, time.time())
    if result.weak_f0:
        print("warning: f0-unbounded (initial potential grows to the domain edge)",
              file=sys.stderr)
    print(f"existence: {result.verdict.verdict} "
          f"(tail exponent {result.verdict.tail_exponent:.3g}, "
          f"truncated area {result.verdict.area_inner:.6g})")
    if analysis is not None:
        fl = analysis.flatness
        print(f"flatness: {fl.verdict}"
              + (f" (violated: {', '.join(fl.violated)})" if fl.violated else ""))
        return 0 if fl.verdict == "PASS" else 2
    print(f"run ended at t={result.series.t[-1]:.6g}; "
          f"area slope {result.area_slope():.6g}")
    return 0


def cmd_aperture(args) -> int:
    scenario = load_config(args.config)
    m0 = scenario.initial_u()
    est = aperture(m0)
    print(f"aperture value: {est.value:.6g}")
    print(f"extrapolated: {est.extrapolated} (fit rms {est.fit_rms:.3g})")
    print("r,ratio")
    for r, ratio in est.samples:
        print(f"{r:.17g},{ratio:.17g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_pair_csv(os.path.join(args.out, "aperture_samples.csv"),
                       "r", est.samples[:, 0], "ratio", est.samples[:, 1])
    return 0


def cmd_classify(args) -> int:
    scenario = load_config(args.config)
    v = classify_global_existence(scenario.initial_u())
    print(f"verdict: {v.verdict}")
    print(f"tail_exponent: {v.tail_exponent:.6g}")
    print(f"area_inner: {v.area_inner:.6g}")
    print(f"fit_rms: {v.fit_rms:.6g}")
    return 0


def _load_snapshot_series(out_dir, name, count):
    fields = []
    for i in range(count):
        f, t, nm = read_snapshot(os.path.join(out_dir, "snapshots", f"{name}_{i:04d}.txt"))
        fields.append((t, f))
    return fields


def cmd_verify(args) -> int:
    """Re-run the pure checks from stored snapshots; 0 iff everything passes."""
    from .potential import identity_residual, max_principle_check
    from .potential_flow import PotentialFlowState, equivalence_defect

    out_dir = args.out
    failures = []
    try:
        with open(os.path.join(out_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
        series = TimeSeries.read_csv(os.path.join(out_dir, "timeseries.csv"))
        for rel in manifest["outputs"]:
            if not os.path.exists(os.path.join(out_dir, rel)):
                raise FileNotFoundError(rel)
        from .scenarios import parse_config

        scenario = parse_config(manifest["config_echo"])
        grid = scenario.grid
        n_rec = len(series)
        u_snaps = _load_snapshot_series(out_dir, "u", n_rec)
        f_snaps = _load_snapshot_series(out_dir, "f", n_rec)
        psi_snaps = _load_snapshot_series(out_dir, "psi", n_rec)
        u0_field, _, _ = read_snapshot(os.path.join(out_dir, "snapshots", "u0.txt"))
        f0_field, _, _ = read_snapshot(os.path.join(out_dir, "snapshots", "f0.txt"))
        t_resid, resid_stored = read_pair_csv(
            os.path.join(out_dir, "identity_residual.csv"))
        _, defect_stored = read_pair_csv(
            os.path.join(out_dir, "equivalence_defect.csv"))
    except (OSError, ValueError, KeyError) as err:
        print(f"verify: missing or unreadable outputs: {err}", file=sys.stderr)
        return 1

    u0 = ConformalField(ScalarField(grid, u0_field.values))
    pstate = PotentialFlowState.create(u0, ScalarField(grid, f0_field.values))

    sup_abs_f = np.array([np.abs(f.values).max() for _, f in f_snaps])
    h_for_mp = grid.h if not grid.stretched else 0.0
    ok_mp, worst = max_principle_check(sup_abs_f, h_for_mp)
    if not ok_mp:
        failures.append(f"max principle violated by {worst:.3e}")

    for i in range(n_rec):
        t_i, u_f = u_snaps[i]
        m = ConformalField(u_f)
        resid = identity_residual(f_snaps[i][1], m)
        if not np.isclose(resid, resid_stored[i], rtol=1e-9, atol=1e-14):
            failures.append(
                f"identity residual mismatch at t={t_i:.6g}: "
                f"{resid:.6e} recomputed vs {resid_stored[i]:.6e} stored")
        pstate.psi = psi_snaps[i][1]
        d = equivalence_defect(pstate, m)
        if not np.isclose(d, defect_stored[i], rtol=1e-9, atol=1e-14):
            failures.append(
                f"equivalence defect mismatch at t={t_i:.6g}: "
                f"{d:.6e} recomputed vs {defect_stored[i]:.6e} stored")

    fl_path = os.path.join(out_dir, "flatness_report.json")
    if os.path.exists(fl_path):
        with open(fl_path) as fh:
            stored = json.load(fh)
        for entry in stored["fits"]:
            try:
                fit = fit_decay(series, entry["k"], tuple(entry["window"]))
            except WindowTooShort:
                failures.append(f"stored fit k={entry['k']} no longer fittable")
                continue
            if entry["slope"] is not None and not np.isclose(
                fit.slope, entry["slope"], rtol=1e-9, atol=1e-12
            ):
                failures.append(
                    f"decay fit k={entry['k']} slope mismatch: "
                    f"{fit.slope:.6g} vs stored {entry['slope']:.6g}")
            if fit.passes != entry["passes"]:
                failures.append(f"decay fit k={entry['k']} pass/fail flipped")

    if failures:
        for f in failures:
            print(f"verify: FAIL {f}", file=sys.stderr)
        return 2
    print(f"verify: OK ({n_rec} recorded times, all pure checks reproduced)")
    return 0


def cmd_fit(args) -> int:
    series = TimeSeries.read_csv(os.path.join(args.out, "timeseries.csv"))
    window = None
    if args.t_min is not None or args.t_max is not None:
        lo = args.t_min if args.t_min is not None else 1.0
        hi = args.t_max if args.t_max is not None else float(series.t[-1])
        window = (lo, hi)
    for k in (0, 1, 2):
        try:
            fit = fit_decay(series, k, window)
        except WindowTooShort as err:
            print(f"k={k}: window-too-short ({err})")
            continue
        print(
            f"k={k}: slope={fit.slope:.4f} residual={fit.residual:.3e} "
            f"bound_constant={fit.bound_constant:.6g} "
            f"explosion_ratio={fit.explosion_ratio:.3g} passes={fit.passes}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ricci2d",
        description="Conformal Ricci flow on the plane: solvers and diagnostics",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a scenario and write artifacts")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--allow-extinction", action="store_true")
    run.add_argument("--t-end", type=float, default=None)
    run.add_argument("--grid-n", type=int, default=None)
    run.add_argument("--scheme", choices=["ExplicitCFL", "ImplicitNewton"],
                     default=None)
    run.set_defaults(fn=cmd_run)

    apt = sub.add_parser("aperture", help="aperture of the initial metric")
    apt.add_argument("--config", required=True)
    apt.add_argument("--out", default=None)
    apt.set_defaults(fn=cmd_aperture)

    cls = sub.add_parser("classify", help="existence class of the initial data")
    cls.add_argument("--config", required=True)
    cls.set_defaults(fn=cmd_classify)

    ver = sub.add_parser("verify", help="re-check a finished run directory")
    ver.add_argument("--out", required=True)
    ver.set_defaults(fn=cmd_verify)

    fit = sub.add_parser("fit", help="re-fit decay windows on a stored series")
    fit.add_argument("--out", required=True)
    fit.add_argument("--t-min", type=float, default=None)
    fit.add_argument("--t-max", type=float, default=None)
    fit.set_defaults(fn=cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SimulationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
