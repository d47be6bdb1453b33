"""Turbine definition, farm layout and the shared value types.

Frame convention: x points east, y north. Wind direction is meteorological,
i.e. the direction the wind blows *from*, in degrees clockwise from north.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml


@dataclass(frozen=True)
class TurbineSpec:
    rotor_diameter: float
    hub_height: float
    cut_in: float
    cut_out: float
    ct_speeds: tuple[float, ...]
    ct_values: tuple[float, ...]
    cp_speeds: tuple[float, ...]
    cp_values: tuple[float, ...]
    yaw_rate_limit: float = 10.0
    wohler_blade: float = 10.0
    wohler_tower: float = 4.0
    power_scaling: float = 1.08
    name: str = "turbine"
    rated_power: float | None = None  # caps the aligned aerodynamic power [W]; None leaves C_P uncapped

    def __post_init__(self):
        if self.rotor_diameter <= 0:
            raise ValueError("rotor diameter must be positive")
        if self.hub_height <= self.rotor_diameter / 2:
            raise ValueError("hub height must exceed the rotor radius")
        if not self.cut_in < self.cut_out:
            raise ValueError("cut-in must be below cut-out")
        if self.rated_power is not None and self.rated_power <= 0:
            raise ValueError("rated power must be positive")
        if self.yaw_rate_limit <= 0:
            raise ValueError("yaw rate limit must be positive")
        for speeds, values, label in (
            (self.ct_speeds, self.ct_values, "ct"),
            (self.cp_speeds, self.cp_values, "cp"),
        ):
            if len(speeds) != len(values) or len(speeds) < 2:
                raise ValueError(f"{label} table needs matching speed/value columns")
            if np.any(np.diff(speeds) <= 0):
                raise ValueError(f"{label} speeds must be strictly increasing")
        ct = np.asarray(self.ct_values)
        cp = np.asarray(self.cp_values)
        if np.any(ct < 0) or np.any(ct >= 1):
            raise ValueError("thrust coefficients must lie in [0, 1)")
        if np.any(cp <= 0) or np.any(cp >= 16 / 27):
            raise ValueError("power coefficients must lie in (0, 16/27)")

    @property
    def rotor_area(self) -> float:
        return math.pi * self.rotor_diameter**2 / 4

    def ct(self, speed):
        """Thrust coefficient at rotor-averaged speed; zero outside the operating range."""
        speed = np.asarray(speed, dtype=float)
        out = np.interp(speed, self.ct_speeds, self.ct_values)
        return np.where((speed < self.cut_in) | (speed > self.cut_out), 0.0, out)

    def cp(self, speed):
        speed = np.asarray(speed, dtype=float)
        out = np.interp(speed, self.cp_speeds, self.cp_values)
        return np.where((speed < self.cut_in) | (speed > self.cut_out), 0.0, out)

    def tables(self):
        """Curve tables as float arrays, for the compiled farm kernel."""
        return (
            np.asarray(self.ct_speeds, dtype=float),
            np.asarray(self.ct_values, dtype=float),
            np.asarray(self.cp_speeds, dtype=float),
            np.asarray(self.cp_values, dtype=float),
        )


@dataclass(frozen=True)
class FarmLayout:
    x: tuple[float, ...]
    y: tuple[float, ...]
    farm_rotation: float = 0.0

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")
        if len(self.x) == 0:
            raise ValueError("layout has no turbines")

    @classmethod
    def from_arrays(cls, x, y, farm_rotation=0.0) -> "FarmLayout":
        return cls(tuple(float(v) for v in x), tuple(float(v) for v in y), float(farm_rotation))

    @classmethod
    def grid(cls, n_rows: int, n_cols: int, dx: float, dy: float) -> "FarmLayout":
        """Rectangular layout numbered left to right, then bottom to top."""
        xs, ys = [], []
        for r in range(n_rows):
            for c in range(n_cols):
                xs.append(c * dx)
                ys.append(r * dy)
        return cls.from_arrays(xs, ys)

    @property
    def n_turbines(self) -> int:
        return len(self.x)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y]).astype(float)

    def validate(self, rotor_diameter: float) -> None:
        p = self.positions
        d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
        d[np.diag_indices_from(d)] = np.inf
        if np.any(d < rotor_diameter * (1 - 1e-12)):
            raise ValueError("turbines closer than one rotor diameter")


@dataclass(frozen=True)
class AmbientState:
    background_speed: float
    wind_direction: float = 270.0
    ambient_ti: float = 0.06
    air_density: float = 1.225

    def __post_init__(self):
        if self.background_speed < 0:
            raise ValueError("background speed must be non-negative")
        if not 0 <= self.wind_direction < 360:
            raise ValueError("wind direction must lie in [0, 360)")
        if not 0 < self.ambient_ti < 1:
            raise ValueError("ambient turbulence intensity must lie in (0, 1)")
        if self.air_density <= 0:
            raise ValueError("air density must be positive")

    def with_speed(self, speed: float) -> "AmbientState":
        return replace(self, background_speed=float(speed))

    @property
    def flow_vector(self) -> np.ndarray:
        """Unit vector the wind blows towards."""
        phi = math.radians(self.wind_direction)
        return np.array([-math.sin(phi), -math.cos(phi)])


@dataclass(frozen=True)
class ControlState:
    yaw: np.ndarray
    availability: np.ndarray
    pitch_offset: np.ndarray = field(default=None)

    def __post_init__(self):
        yaw = np.asarray(self.yaw, dtype=float)
        avail = np.asarray(self.availability).astype(bool)
        if yaw.shape != avail.shape or yaw.ndim != 1:
            raise ValueError("yaw and availability must be 1-D vectors of equal length")
        if np.any(np.abs(yaw) > 90):
            raise ValueError("yaw beyond +-90 degrees")
        pitch = np.zeros_like(yaw) if self.pitch_offset is None else np.asarray(self.pitch_offset, float)
        object.__setattr__(self, "yaw", yaw)
        object.__setattr__(self, "availability", avail)
        object.__setattr__(self, "pitch_offset", pitch)

    @classmethod
    def greedy(cls, n: int, availability=None) -> "ControlState":
        avail = np.ones(n, bool) if availability is None else availability
        return cls(np.zeros(n), avail)


@dataclass(frozen=True)
class MeasurementWindow:
    """Trailing-window averages handed to the controller."""

    length: float
    power: np.ndarray
    yaw: np.ndarray
    completeness: np.ndarray

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("window length must be positive")
        c = np.asarray(self.completeness, float)
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("completeness must lie in [0, 1]")
        object.__setattr__(self, "power", np.asarray(self.power, float))
        object.__setattr__(self, "yaw", np.asarray(self.yaw, float))
        object.__setattr__(self, "completeness", c)


def rotate_layout(layout: FarmLayout, angle: float) -> FarmLayout:
    """Rotate the layout counter-clockwise by ``angle`` degrees about its centroid."""
    p = layout.positions
    centre = p.mean(axis=0)
    a = math.radians(angle)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    q = (p - centre) @ rot.T + centre
    return FarmLayout.from_arrays(q[:, 0], q[:, 1], layout.farm_rotation + angle)


def streamwise_coordinate(layout: FarmLayout, wind_direction: float) -> np.ndarray:
    phi = math.radians(wind_direction)
    return layout.positions @ np.array([-math.sin(phi), -math.cos(phi)])


def downstream_order(layout: FarmLayout, wind_direction: float) -> np.ndarray:
    """Turbine indices sorted upstream first; ties keep the original numbering."""
    # rounding to micrometres stops trig round-off from splitting exact ties
    s = np.round(streamwise_coordinate(layout, wind_direction), 6)
    return np.lexsort((np.arange(layout.n_turbines), s))


# ---------------------------------------------------------------------------
# config files

DATA_DIR = Path(__file__).parent / "data"


def turbine_from_dict(d: dict) -> TurbineSpec:
    ct = d["ct_curve"]
    cp = d["cp_curve"]
    return TurbineSpec(
        rotor_diameter=float(d["rotor_diameter"]),
        hub_height=float(d["hub_height"]),
        cut_in=float(d["cut_in"]),
        cut_out=float(d["cut_out"]),
        ct_speeds=tuple(float(v) for v in ct["speed"]),
        ct_values=tuple(float(v) for v in ct["value"]),
        cp_speeds=tuple(float(v) for v in cp["speed"]),
        cp_values=tuple(float(v) for v in cp["value"]),
        yaw_rate_limit=float(d.get("yaw_rate_limit", 10.0)),
        wohler_blade=float(d.get("wohler_blade", 10.0)),
        wohler_tower=float(d.get("wohler_tower", 4.0)),
        power_scaling=float(d.get("power_scaling", 1.08)),
        name=str(d.get("name", "turbine")),
        rated_power=float(d["rated_power"]) if d.get("rated_power") is not None else None,
    )


def load_turbine(path=None) -> TurbineSpec:
    """Read a turbine file; ``None`` or ``"default"`` gives the bundled 10 MW machine."""
    if path is None or str(path) == "default":
        path = DATA_DIR / "turbine_10mw.yaml"
    with open(path) as fh:
        return turbine_from_dict(yaml.safe_load(fh))


def layout_from_dict(d: dict, rotor_diameter: float) -> FarmLayout:
    if "grid" in d:
        g = d["grid"]
        layout = FarmLayout.grid(
            int(g["rows"]),
            int(g["cols"]),
            float(g.get("dx_D", 5.0)) * rotor_diameter,
            float(g.get("dy_D", 5.0)) * rotor_diameter,
        )
    else:
        layout = FarmLayout.from_arrays(d["x"], d["y"])
    rotation = float(d.get("rotation", 0.0))
    if rotation:
        layout = rotate_layout(layout, rotation)
    return layout


def load_layout(path, rotor_diameter: float) -> FarmLayout:
    """Layout from CSV (``id,x,y``) or from a YAML mapping with ``x``/``y`` or ``grid``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            rows = sorted(csv.DictReader(fh), key=lambda r: int(r["id"]))
        return FarmLayout.from_arrays([float(r["x"]) for r in rows], [float(r["y"]) for r in rows])
    with open(path) as fh:
        d = yaml.safe_load(fh)
    return layout_from_dict(d.get("layout", d), rotor_diameter)


def tc_like_layout(rotor_diameter: float, rotation: float = 0.0) -> FarmLayout:
    """32-turbine aligned 4 x 8 reference layout, 5 D spacing, numbered from the bottom left."""
    layout = FarmLayout.grid(4, 8, 5 * rotor_diameter, 5 * rotor_diameter)
    return rotate_layout(layout, rotation) if rotation else layout
