"""Seven-dimensional fatigue lookup table: grid, build, interpolation and persistence."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
import yaml

from .fatigue import CHANNELS, load_case_summary, seed_count

AXIS_NAMES = ("wind_speed", "ti", "yaw", "pitch", "wake_depth", "wake_width", "wake_centre")
DEPTH_AXIS = 4

DEFAULT_AXES = (
    (4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 19, 25),
    (0.03, 0.10, 0.20),
    (-30, -20, -10, 0, 10, 20, 30),
    (-6, -4, -2, 0, 2, 4, 6),
    (0.0, 0.3, 0.5),
    (0.65, 1.2, 1.73),
    (-1.5, -0.6, 0.0, 0.6, 1.5),
)

DESK_AXES = (
    (6, 8, 10, 12),
    (0.03, 0.10, 0.20),
    (-30, -15, 0, 15, 30),
    (0,),
    (0.0, 0.3, 0.5),
    (1.2,),
    (-1.5, -0.6, 0.0, 0.6, 1.5),
)

OUTPUT_NAMES = tuple(f"del_{c}" for c in CHANNELS) + tuple(f"mean_{c}" for c in CHANNELS)


@dataclass(frozen=True)
class LutGrid:
    axes: tuple

    def __post_init__(self):
        if len(self.axes) != 7:
            raise ValueError("the table has seven axes")
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for name, a in zip(AXIS_NAMES, axes):
            if a.ndim != 1 or a.size == 0:
                raise ValueError(f"axis {name} is empty")
            if np.any(np.diff(a) <= 0):
                raise ValueError(f"axis {name} must be strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def default(cls) -> "LutGrid":
        return cls(DEFAULT_AXES)

    @classmethod
    def desk(cls) -> "LutGrid":
        return cls(DESK_AXES)

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def wake_free_nodes(self) -> int:
        """Distinct nodes of the zero-depth slice, where width and centre are irrelevant."""
        if self.axes[DEPTH_AXIS][0] != 0:
            return 0
        return int(np.prod(self.shape[:DEPTH_AXIS]))

    def distinct_nodes(self) -> list[tuple]:
        """Index tuples that need a simulation; zero-depth nodes keep only the first width/centre."""
        out = []
        for idx in itertools.product(*(range(n) for n in self.shape)):
            if self.axes[DEPTH_AXIS][idx[DEPTH_AXIS]] == 0 and (idx[5] != 0 or idx[6] != 0):
                continue
            out.append(idx)
        return out

    def n_distinct(self) -> int:
        n = self.shape
        waked = int(np.sum(self.axes[DEPTH_AXIS] != 0))
        per_state = int(np.prod(n[:DEPTH_AXIS]))
        zero = self.wake_free_nodes() // per_state if per_state else 0
        return per_state * (zero + waked * n[5] * n[6])

    def simulation_count(self, collapse: bool = True) -> int:
        """Total load cases, counting the seeds each turbulence level needs."""
        seeds = sum(seed_count(float(t)) for t in self.axes[1])
        per_ti = self.n_distinct() if collapse else self.n_nodes
        return per_ti // self.shape[1] * seeds

    def point(self, idx) -> tuple:
        return tuple(float(a[i]) for a, i in zip(self.axes, idx))

    def to_dict(self) -> dict:
        return {name: a.tolist() for name, a in zip(AXIS_NAMES, self.axes)}

    @classmethod
    def from_dict(cls, d: dict) -> "LutGrid":
        return cls(tuple(d[name] for name in AXIS_NAMES))


def load_grid(path) -> LutGrid:
    if path is None or str(path) == "default":
        return LutGrid.default()
    if str(path) == "desk":
        return LutGrid.desk()
    with open(path) as fh:
        return LutGrid.from_dict(yaml.safe_load(fh))


@dataclass(frozen=True)
class FatigueLut:
    grid: LutGrid
    values: np.ndarray  # shape grid.shape + (8,)
    seeds: dict
    provenance: str = ""

    def __post_init__(self):
        if self.values.shape != self.grid.shape + (len(OUTPUT_NAMES),):
            raise ValueError("value array does not match the grid")

    @property
    def axes(self):
        return self.grid.axes

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.grid.to_dict(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()

    def interpolate(self, points) -> tuple[np.ndarray, np.ndarray]:
        return lut_interpolate(self, points)

    def save(self, path) -> None:
        """JSON header line followed by the little-endian float64 value blob."""
        header = {
            "format": "qsfarm-lut-1",
            "axes": self.grid.to_dict(),
            "outputs": list(OUTPUT_NAMES),
            "shape": list(self.values.shape),
            "seeds": {str(k): v for k, v in self.seeds.items()},
            "provenance": self.provenance,
            "sha256": self.digest(),
        }
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "FatigueLut":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            blob = fh.read()
        if header.get("format") != "qsfarm-lut-1":
            raise ValueError("not a lookup-table file")
        values = np.frombuffer(blob, dtype="<f8").reshape(header["shape"]).astype(float)
        lut = cls(LutGrid.from_dict(header["axes"]), values,
                  {float(k): v for k, v in header["seeds"].items()}, header.get("provenance", ""))
        if lut.digest() != header["sha256"]:
            raise ValueError("lookup-table checksum mismatch")
        return lut

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(AXIS_NAMES + OUTPUT_NAMES)
            for idx in itertools.product(*(range(n) for n in self.grid.shape)):
                w.writerow([*self.grid.point(idx), *(f"{v:.10g}" for v in self.values[idx])])


def _locate(axis: np.ndarray, x: np.ndarray):
    """Lower cell index, fractional position and clamp flag along one axis."""
    if axis.size == 1:
        return np.zeros(x.shape, dtype=np.intp), np.zeros(x.shape), x != axis[0]
    clamped = (x < axis[0]) | (x > axis[-1])
    xc = np.clip(x, axis[0], axis[-1])
    i = np.clip(np.searchsorted(axis, xc, side="right") - 1, 0, axis.size - 2)
    t = (xc - axis[i]) / (axis[i + 1] - axis[i])
    return i, t, clamped


def lut_interpolate(lut: FatigueLut, points) -> tuple[np.ndarray, np.ndarray]:
    """Multilinear interpolation without extrapolation.

    ``points`` is one 7-tuple or an (M, 7) array. Returns values of shape (8,)
    or (M, 8) and a matching clamp flag (True where any coordinate was pulled
    back to the table bounds).
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != 7:
        raise ValueError("points need seven coordinates")
    lo, frac, flags = [], [], np.zeros(p.shape[0], dtype=bool)
    active = []
    for d, axis in enumerate(lut.axes):
        i, t, c = _locate(axis, p[:, d])
        lo.append(i)
        frac.append(t)
        flags |= c
        if axis.size > 1:
            active.append(d)
    out = np.zeros((p.shape[0], lut.values.shape[-1]))
    for corner in itertools.product((0, 1), repeat=len(active)):
        w = np.ones(p.shape[0])
        idx = list(lo)
        for d, bit in zip(active, corner):
            w = w * (frac[d] if bit else 1 - frac[d])
            idx[d] = lo[d] + bit
        nz = w != 0
        if np.any(nz):
            out[nz] += w[nz, None] * lut.values[tuple(ix[nz] for ix in idx)]
    return (out[0], flags[0]) if single else (out, flags)


# ---------------------------------------------------------------------------
# build


def _run_cases(tasks, case_fn):
    return [case_fn(point, seed) for point, seed in tasks]


def build_lut(grid: LutGrid | None = None, case_fn=None, workers: int = 1, seeds_fn=seed_count,
              chunk: int = 64, provenance: str = "surrogate") -> FatigueLut:
    """Evaluate every distinct node over its seed set and average.

    ``case_fn(point, seed)`` returns 4 DELs and 4 means. Results are reduced in
    node order, then seed order, so the table is bit-identical for any worker
    count. Zero-depth nodes are computed once and copied across width and
    centre.
    """
    grid = LutGrid.default() if grid is None else grid
    case_fn = load_case_summary if case_fn is None else case_fn
    seeds = {float(t): int(seeds_fn(float(t))) for t in grid.axes[1]}
    nodes = grid.distinct_nodes()
    tasks, owner = [], []
    for k, idx in enumerate(nodes):
        point = grid.point(idx)
        for s in range(seeds[point[1]]):
            tasks.append((point, s))
            owner.append(k)
    if workers > 1:
        chunks = [tasks[i:i + chunk] for i in range(0, len(tasks), chunk)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for part in ex.map(partial(_run_cases, case_fn=case_fn), chunks) for r in part]
    else:
        results = _run_cases(tasks, case_fn)

    n_out = len(OUTPUT_NAMES)
    sums = np.zeros((len(nodes), n_out))
    counts = np.zeros(len(nodes))
    for k, r in zip(owner, results):
        sums[k] += np.asarray(r, dtype=float)
        counts[k] += 1
    node_values = sums / counts[:, None]

    values = np.full(grid.shape + (n_out,), np.nan)
    depth = grid.axes[DEPTH_AXIS]
    for k, idx in enumerate(nodes):
        if depth[idx[DEPTH_AXIS]] == 0:
            values[idx[:5]] = node_values[k]
        else:
            values[idx] = node_values[k]
    return FatigueLut(grid, values, seeds, provenance)


def default_case_fn(turbine=None):
    """Surrogate case evaluator bound to a turbine's geometry and Wohler exponents."""
    if turbine is None:
        return load_case_summary
    m = (turbine.wohler_blade, turbine.wohler_blade, turbine.wohler_tower, turbine.wohler_tower)
    return partial(load_case_summary, wohler=m, diameter=turbine.rotor_diameter, hub_height=turbine.hub_height)


def n_table_nodes(axes=DEFAULT_AXES) -> int:
    return math.prod(len(a) for a in axes)
