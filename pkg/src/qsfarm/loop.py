"""Closed-loop runner: measure, estimate, calibrate, optimise and dispatch over the plant."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .estimation import CalibrationConfig, calibrate, estimate_background, upstream_set
from .farm import FarmModel
from .lut import FatigueLut, lut_interpolate
from .optimize import ObjectiveWeights, lut_inputs, optimize_yaw
from .plant import Plant, PlantConfig, averaged_window, availability_flags
from .stats import block_bootstrap_ci, welch_t_test
from .turbine import (
    DATA_DIR,
    AmbientState,
    FarmLayout,
    TurbineSpec,
    layout_from_dict,
    load_layout,
    load_turbine,
)
from .wake import WakeParams

log = logging.getLogger(__name__)

MODES = ("greedy", "ol", "cl")
BIN = 10.0  # s, resolution of the stored farm-power series


@dataclass(frozen=True)
class Scenario:
    name: str
    turbine: TurbineSpec
    layout: FarmLayout
    ambient: AmbientState
    plant: PlantConfig = PlantConfig()
    controller: WakeParams = WakeParams()
    duration: float = 3600.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        for k, _, _ in self.plant.schedule:
            if not 0 <= k < self.layout.n_turbines:
                raise ValueError(f"schedule names unknown turbine {k}")


def _params(d, default=WakeParams()) -> WakeParams:
    if d is None:
        return default
    base = default.as_array()
    keys = ("k_a", "k_b", "alpha", "beta")
    return WakeParams(*(float(d.get(k, v)) for k, v in zip(keys, base)))


def _schedule(entries, layout: FarmLayout, rotor_diameter: float):
    """Turbine entries ``{turbine, off, on}`` or whole streamwise rows ``{row, off, on}``."""
    out = []
    x = np.asarray(layout.x)
    for e in entries or ():
        t_off, t_on = float(e.get("off", 0.0)), float(e.get("on", math.inf))
        if "row" in e:
            cols = np.unique(np.round(x, 3))
            members = np.nonzero(np.round(x, 3) == cols[int(e["row"])])[0]
        else:
            members = [int(e["turbine"])]
        out.extend((int(k), t_off, t_on) for k in members)
    return tuple(out)


def scenario_from_dict(d: dict, base_dir=None) -> Scenario:
    turbine = load_turbine(d.get("turbine"))
    lay = d["layout"]
    if isinstance(lay, str):
        path = Path(lay)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        layout = load_layout(path, turbine.rotor_diameter)
    else:
        layout = layout_from_dict(lay, turbine.rotor_diameter)
    a = d["ambient"]
    ambient = AmbientState(float(a["speed"]), float(a.get("direction", 270.0)), float(a.get("ti", 0.06)),
                           float(a.get("air_density", 1.225)))
    p = d.get("plant", {})
    plant = PlantConfig(
        truth=_params(p.get("truth")),
        eta=p.get("eta"),
        deficit_scale=float(p.get("deficit_scale", 1.0)),
        noise_std=float(p.get("noise_std", 0.03)),
        noise_tau=float(p.get("noise_tau", 30.0)),
        dt=float(p.get("dt", 0.5)),
        spin_up=float(d.get("spin_up", 900.0)),
        schedule=_schedule(d.get("schedule"), layout, turbine.rotor_diameter),
    )
    controller = _params(d.get("controller", {}).get("kappa"))
    return Scenario(str(d.get("name", "scenario")), turbine, layout, ambient, plant, controller,
                    float(d.get("duration", 3600.0)))


def load_scenario(path) -> Scenario:
    """Scenario YAML file, or the name of a bundled scenario."""
    p = Path(path)
    if not p.exists():
        bundled = DATA_DIR / f"scenario_{path}.yaml"
        if not bundled.exists():
            raise FileNotFoundError(path)
        p = bundled
    with open(p) as fh:
        return scenario_from_dict(yaml.safe_load(fh), p.parent)


@dataclass(frozen=True)
class LoopConfig:
    mode: str = "cl"
    sample_time: float = 600.0
    weights: ObjectiveWeights = ObjectiveWeights()
    ridge: float = 2.0
    starts: int = 2
    off_threshold: float = 0.10
    channel: int = 0
    open_loop_table: tuple | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.sample_time <= 0:
            raise ValueError("sampling time must be positive")


@dataclass
class RunReport:
    scenario: str
    mode: str
    seed: int
    sample_time: float
    duration: float
    weights: tuple
    windows: list = field(default_factory=list)
    farm_power: list = field(default_factory=list)  # W, BIN-second means over the evaluation period
    energy: float = 0.0  # J
    turbine_del: list | None = None
    farm_del: float | None = None
    final_kappa: list = field(default_factory=list)
    yaw_series: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=True)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @property
    def window_power(self) -> np.ndarray:
        return np.array([w["farm_power"] for w in self.windows])

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        body = self.to_dict()
        body["sha256"] = self.digest()
        tmp = out / "report.json.tmp"
        tmp.write_text(json.dumps(body, sort_keys=True, indent=1))
        tmp.replace(out / "report.json")
        with open(out / "windows.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            n = len(self.windows[0]["power"]) if self.windows else 0
            w.writerow(["window", "t_end", "u_b", "k_a", "k_b", "alpha", "beta"]
                       + [f"power_{k}" for k in range(n)] + [f"yaw_{k}" for k in range(n)]
                       + [f"target_{k}" for k in range(n)])
            for r in self.windows:
                w.writerow([r["index"], r["t_end"], r["u_b"], *r["kappa"], *r["power"], *r["yaw"], *r["target"]])
        return out / "report.json"

    @classmethod
    def load(cls, path) -> "RunReport":
        p = Path(path)
        if p.is_dir():
            p = p / "report.json"
        body = json.loads(p.read_text())
        digest = body.pop("sha256", None)
        rep = cls(**body)
        if digest is not None and rep.digest() != digest:
            raise ValueError("report hash mismatch")
        return rep


def open_loop_table(scenario: Scenario, config: LoopConfig, lut: FatigueLut | None, seed: int = 0) -> np.ndarray:
    """Set points from the uncalibrated controller model at the nominal inflow, all turbines on."""
    model = FarmModel(scenario.turbine, scenario.layout, scenario.controller)
    return optimize_yaw(model, scenario.ambient, config.weights, lut if config.weights.w_l > 0 else None,
                        None, config.starts, seed).yaw


def window_dels(plant: Plant, window, lut: FatigueLut, channel: int) -> np.ndarray:
    """Channel DEL per turbine from the truth flow at the window's mean yaw; zero when off."""
    on = availability_flags(window, 0.5)
    sol = plant.truth(window.yaw, on)
    vals, _ = lut_interpolate(lut, lut_inputs(sol, window.yaw, lut))
    return np.where(on, vals[:, channel], 0.0)


class Controller:
    """Closed-loop state carried between windows: model, parameters and last estimate."""

    def __init__(self, scenario: Scenario, config: LoopConfig, lut: FatigueLut | None, seed: int):
        self.scenario = scenario
        self.config = config
        self.lut = lut if config.weights.w_l > 0 else None
        self.seed = seed
        self.model = FarmModel(scenario.turbine, scenario.layout, scenario.controller)
        self.speed = scenario.ambient.background_speed

    def ambient(self, speed=None) -> AmbientState:
        a = self.scenario.ambient
        return AmbientState(self.speed if speed is None else speed, a.wind_direction, a.ambient_ti, a.air_density)

    def update(self, window, target) -> tuple[np.ndarray, dict]:
        cfg = self.config
        info = {}
        b = availability_flags(window, cfg.off_threshold)
        members = upstream_set(self.model, self.ambient(), b)
        self.speed = estimate_background(window, self.model, self.ambient(), members)
        amb = self.ambient()
        rec = calibrate(window, self.model, amb, self.model.params, b, CalibrationConfig(ridge=cfg.ridge))
        self.model = self.model.with_params(rec.params)
        res = optimize_yaw(self.model, amb, cfg.weights, self.lut, b, cfg.starts, self.seed, initial=target)
        info.update(rms_before=rec.rms_before, rms_after=rec.rms_after, objective=res.objective,
                    p_gain=res.p_gain, calibration_skipped=rec.degenerate)
        return res.yaw, info


def run_scenario(scenario: Scenario, config: LoopConfig = LoopConfig(), seed: int = 0,
                 lut: FatigueLut | None = None) -> RunReport:
    """Emulate one scenario under greedy, open-loop or closed-loop control.

    The evaluation period starts after spin-up and is split into sampling
    windows. Closed-loop control updates the set points at the end of spin-up
    and after every window but the last; open-loop control dispatches its
    table once at the start; greedy holds zero yaw.
    """
    ts, dur = config.sample_time, scenario.duration
    n_win = dur / ts
    if abs(n_win - round(n_win)) > 1e-9:
        raise ValueError("the sampling time must divide the duration")
    n_win = int(round(n_win))
    plant = Plant(scenario.turbine, scenario.layout, scenario.ambient, scenario.plant, seed)
    n = scenario.layout.n_turbines
    target = np.zeros(n)
    if config.mode == "ol":
        table = config.open_loop_table
        target = np.asarray(table, float) if table is not None else open_loop_table(scenario, config, lut)
    plant.set_targets(target)
    controller = Controller(scenario, config, lut, seed) if config.mode == "cl" else None
    report = RunReport(scenario.name, config.mode, int(seed), ts, dur,
                       (config.weights.w_p, config.weights.w_l))

    def decide(window):
        nonlocal target
        try:
            new, info = controller.update(window, target)
            target = np.asarray(new, float)
            plant.set_targets(target)
            return info
        except Exception as exc:  # keep the set points in force and carry on
            log.warning("window update failed: %s", exc)
            return {"error": str(exc)}

    spin = scenario.plant.spin_up
    plant.run(spin)
    info = {}
    if controller is not None and spin > 0:
        info = decide(averaged_window(plant.history, min(ts, spin), plant.config.dt))
    start = len(plant.history)
    dels = []
    for w in range(n_win):
        plant.run(ts)
        window = averaged_window(plant.history, ts, plant.config.dt)
        rec = {
            "index": w,
            "t_end": plant.state.clock,
            "power": window.power.tolist(),
            "farm_power": float(window.power.sum()),
            "yaw": window.yaw.tolist(),
            "completeness": window.completeness.tolist(),
            "u_b": controller.speed if controller else scenario.ambient.background_speed,
            "kappa": (controller.model.params if controller else scenario.controller).as_array().tolist(),
            "update": info,
        }
        if lut is not None:
            d = window_dels(plant, window, lut, config.channel)
            dels.append(d)
            rec["del"] = d.tolist()
        if controller is not None and w < n_win - 1:
            info = decide(window)
        rec["target"] = target.tolist()
        report.windows.append(rec)
        report.yaw_series.append(window.yaw.tolist())

    _, power, _, _, _ = plant.history.arrays(start)
    farm = power.sum(axis=1)
    per_bin = int(round(BIN / plant.config.dt))
    report.farm_power = farm[: farm.size // per_bin * per_bin].reshape(-1, per_bin).mean(axis=1).tolist()
    report.energy = float(sum(r["farm_power"] for r in report.windows) * ts)
    if dels:
        m = scenario.turbine.wohler_blade if config.channel < 2 else scenario.turbine.wohler_tower
        tally = (np.sum(np.asarray(dels) ** m, axis=0) * ts / dur) ** (1.0 / m)
        report.turbine_del = tally.tolist()
        report.farm_del = float(tally.sum())
    report.final_kappa = (controller.model.params if controller else scenario.controller).as_array().tolist()
    return report


def report_gains(a: RunReport, b: RunReport, block: int = 20, resamples: int = 1000, seed: int = 0) -> dict:
    """Gains of run ``b`` over run ``a``: energy, farm DEL, bootstrap interval and Welch test."""
    if a.duration != b.duration or a.sample_time != b.sample_time or len(a.farm_power) != len(b.farm_power):
        raise ValueError("runs cover different periods")
    pa, pb = np.asarray(a.farm_power), np.asarray(b.farm_power)
    mean_a = pa.mean()
    lo, hi = block_bootstrap_ci((pb - pa) / mean_a, block, resamples, seed=seed)
    wa, wb = a.window_power, b.window_power
    if np.array_equal(wa, wb):
        t, dof, p = 0.0, float(wa.size * 2 - 2), 1.0
    else:
        t, dof, p = welch_t_test(wb, wa)
    out = {
        "energy_gain": b.energy / a.energy - 1.0,
        "energy_gain_ci": [lo, hi],
        "welch_t": t,
        "welch_dof": dof,
        "welch_p": p,
        "sample_unit": "window mean farm power",
    }
    if a.farm_del is not None and b.farm_del is not None:
        out["farm_del_change"] = b.farm_del / a.farm_del - 1.0
    return out
