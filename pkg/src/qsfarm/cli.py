"""Command-line entry point: fatigue table, optimisation, calibration, scenario runs and statistics."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .estimation import CalibrationConfig, calibrate, estimate_background, upstream_set
from .farm import FarmModel
from .loop import MODES, LoopConfig, RunReport, load_scenario, report_gains, run_scenario
from .lut import AXIS_NAMES, OUTPUT_NAMES, FatigueLut, build_lut, default_case_fn, load_grid, lut_interpolate
from .optimize import ObjectiveWeights, optimize_yaw
from .plant import availability_flags
from .turbine import AmbientState, MeasurementWindow, layout_from_dict, load_layout, load_turbine
from .wake import WakeParams


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def cmd_lut_build(args) -> None:
    grid = load_grid(args.grid)
    lut = build_lut(grid, default_case_fn(load_turbine(args.turbine)), workers=args.workers,
                    provenance=f"surrogate:{args.grid}")
    lut.save(args.out)
    if args.csv:
        lut.dump_csv(args.csv)
    _emit({"nodes": grid.n_nodes, "simulations": grid.simulation_count(), "sha256": lut.digest(), "out": args.out})


def cmd_lut_query(args) -> None:
    lut = FatigueLut.load(args.lut)
    vals, flag = lut_interpolate(lut, _floats(args.point))
    _emit({"inputs": dict(zip(AXIS_NAMES, _floats(args.point))), "clamped": bool(flag),
           "outputs": dict(zip(OUTPUT_NAMES, vals.tolist()))})


def cmd_lut_dump(args) -> None:
    FatigueLut.load(args.lut).dump_csv(args.out)


def _ambient(text: str) -> AmbientState:
    u, phi, ti = _floats(text)
    return AmbientState(u, phi % 360.0, ti)


def cmd_optimize(args) -> None:
    turbine = load_turbine(args.turbine)
    model = FarmModel(turbine, load_layout(args.layout, turbine.rotor_diameter))
    avail = np.ones(model.n_turbines, bool)
    if args.off:
        avail[[int(k) for k in args.off.split(",")]] = False
    lut = FatigueLut.load(args.lut) if args.lut else None
    res = optimize_yaw(model, _ambient(args.ambient), ObjectiveWeights.parse(args.weights), lut, avail,
                       args.starts, args.seed)
    _emit({"yaw": res.yaw.tolist(), "p_gain": res.p_gain,
           "del_gain": None if np.isnan(res.del_gain) else res.del_gain,
           "objective": res.objective, "converged": res.converged, "evaluations": res.evaluations})


def read_measurements(path, n: int) -> MeasurementWindow:
    """CSV with ``turbine,power_mean_w,yaw_mean_deg,completeness``; absent turbines count as off."""
    power, yaw, comp = np.zeros(n), np.zeros(n), np.zeros(n)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["turbine"])
            power[k] = float(row["power_mean_w"])
            yaw[k] = float(row["yaw_mean_deg"])
            comp[k] = float(row["completeness"])
    return MeasurementWindow(600.0, power, yaw, comp)


def cmd_calibrate(args) -> None:
    with open(args.state) as fh:
        state = yaml.safe_load(fh)
    turbine = load_turbine(state.get("turbine"))
    layout = layout_from_dict(state["layout"], turbine.rotor_diameter)
    kappa = WakeParams(**state.get("kappa", {}))
    model = FarmModel(turbine, layout, kappa)
    a = state["ambient"]
    amb = AmbientState(float(a.get("speed", 8.0)), float(a.get("direction", 270.0)), float(a.get("ti", 0.06)))
    window = read_measurements(args.measurements, layout.n_turbines)
    b = availability_flags(window, args.off_threshold)
    if "speed" not in a:
        amb = amb.with_speed(estimate_background(window, model, amb, upstream_set(model, amb, b)))
    rec = calibrate(window, model, amb, kappa, b, CalibrationConfig(ridge=args.ridge))
    _emit({"background_speed": amb.background_speed, "kappa_before": rec.kappa_before.tolist(),
           "kappa_after": rec.kappa_after.tolist(), "rms_before_w": rec.rms_before, "rms_after_w": rec.rms_after,
           "degenerate": rec.degenerate, "available": b.tolist()})


def cmd_run(args) -> None:
    scenario = load_scenario(args.scenario)
    lut = FatigueLut.load(args.lut) if args.lut else None
    cfg = LoopConfig(mode=args.mode, sample_time=args.sample_time, weights=ObjectiveWeights.parse(args.weights),
                     ridge=args.ridge, starts=args.starts)
    report = run_scenario(scenario, cfg, args.seed, lut)
    path = report.save(args.out)
    _emit({"report": str(path), "sha256": report.digest(), "energy_j": report.energy, "farm_del": report.farm_del})


def cmd_stats(args) -> None:
    a, b = RunReport.load(args.a), RunReport.load(args.b)
    _emit(report_gains(a, b, args.block, args.resamples))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsfarm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    lut = sub.add_parser("lut", help="fatigue lookup table")
    lsub = lut.add_subparsers(dest="lut_command", required=True)
    b = lsub.add_parser("build")
    b.add_argument("--grid", default="desk", help="'default', 'desk' or a YAML axis file")
    b.add_argument("--turbine", default="default")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", required=True)
    b.add_argument("--csv")
    b.set_defaults(func=cmd_lut_build)
    q = lsub.add_parser("query")
    q.add_argument("--lut", required=True)
    q.add_argument("--point", required=True, help="U,TI,yaw,pitch,depth,width,centre")
    q.set_defaults(func=cmd_lut_query)
    d = lsub.add_parser("dump-csv")
    d.add_argument("--lut", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_lut_dump)

    o = sub.add_parser("optimize", help="yaw set points for one inflow")
    o.add_argument("--layout", required=True)
    o.add_argument("--turbine", default="default")
    o.add_argument("--ambient", required=True, help="U,direction,TI")
    o.add_argument("--weights", default="1,0")
    o.add_argument("--lut")
    o.add_argument("--off", help="comma-separated turbine ids that are off")
    o.add_argument("--starts", type=int, default=5)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("calibrate", help="fit wake parameters to one measurement window")
    c.add_argument("--measurements", required=True)
    c.add_argument("--state", required=True)
    c.add_argument("--lambda", dest="ridge", type=float, default=2.0)
    c.add_argument("--off-threshold", type=float, default=0.10)
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("run", help="emulate a scenario")
    r.add_argument("--scenario", required=True, help="YAML file or bundled name")
    r.add_argument("--mode", choices=MODES, default="cl")
    r.add_argument("--weights", default="1,0")
    r.add_argument("--lut")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--sample-time", type=float, default=600.0)
    r.add_argument("--lambda", dest="ridge", type=float, default=2.0)
    r.add_argument("--starts", type=int, default=2)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("stats", help="compare two run reports")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--block", type=int, default=20)
    s.add_argument("--resamples", type=int, default=1000)
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
