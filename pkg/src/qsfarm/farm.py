"""Farm flow field by recursive wake merging, rotor averaging and turbine power.

Turbines are visited upstream first. Each turbine's inflow is the carrying
field with every earlier wake merged in: the wake deficit only acts on the
velocity component along the rotor normal, the in-plane component passes
unchanged. Velocities are evaluated lazily at the points that are needed (hub
centres and rotor quadrature points), never on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .turbine import AmbientState, ControlState, FarmLayout, TurbineSpec, downstream_order
from .wake import (
    NEAR_WAKE_WIDTH,
    WakeParams,
    _far_wake_log,
    added_turbulence,
    initial_skew_angle,
    near_wake_length,
    softplus,
    wake_expansion,
    wake_widths,
)

N_QUAD = 16


def rotor_quadrature(n_per_ring: int = 8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equal-area two-ring disc rule on the unit-radius rotor.

    Returns lateral and vertical offsets (fractions of the radius) and weights.
    """
    angles = 2 * np.pi * np.arange(n_per_ring) / n_per_ring
    inner = math.sqrt(0.25)
    outer = math.sqrt(0.75)
    lat = np.concatenate([inner * np.cos(angles), outer * np.cos(angles + np.pi / n_per_ring)])
    vert = np.concatenate([inner * np.sin(angles), outer * np.sin(angles + np.pi / n_per_ring)])
    weights = np.full(lat.size, 1.0 / lat.size)
    return lat, vert, weights


QUAD_LAT, QUAD_VERT, QUAD_WEIGHTS = rotor_quadrature()


def turbine_orientation(u: float, v: float, yaw: float) -> float:
    """Rotor-normal heading in degrees: local flow heading plus yaw."""
    if u == 0 and v == 0:
        raise ValueError("orientation undefined for zero velocity")
    return math.degrees(math.atan2(v, u)) + yaw


def rotor_average(speed_fn, centre, heading: float, radius: float, hub_height: float) -> float:
    """Quadrature mean of ``speed_fn(x, y, z)`` over a rotor disc facing ``heading`` (deg)."""
    t = math.radians(heading)
    lx, ly = -math.sin(t), math.cos(t)
    xs = centre[0] + radius * QUAD_LAT * lx
    ys = centre[1] + radius * QUAD_LAT * ly
    zs = hub_height + radius * QUAD_VERT
    return float(np.sum(QUAD_WEIGHTS * np.asarray(speed_fn(xs, ys, zs), dtype=float)))


def turbine_power(speed, yaw, spec: TurbineSpec, air_density: float = 1.225, apply_eta: bool = True, available=True):
    """Cosine-law power in watts; zero outside cut-in/cut-out or when unavailable.

    The aligned power is capped at rated before the yaw and efficiency factors.
    """
    speed = np.asarray(speed, dtype=float)
    g = np.radians(np.asarray(yaw, dtype=float))
    c = np.cos(g)
    p = 0.5 * air_density * spec.rotor_area * spec.cp(speed) * speed**3
    if spec.rated_power is not None:
        p = np.minimum(p, spec.rated_power)
    p = p * c**3
    if apply_eta:
        p = p * spec.power_scaling / c
    return np.where(np.asarray(available, dtype=bool), p, 0.0)


# ---------------------------------------------------------------------------
# compiled recursion


# streamwise tolerance [m]; trig round-off must not put side-by-side rotors in each other's wake
_X_EPS = 1e-6

# per-wake record columns
_WX, _WY, _FCOS, _FSIN, _NCOS, _NSIN, _CT, _YAW, _KW, _X0, _COSG, _TANT, _COEF, _LOG0 = range(14)
_N_REC = 14


@njit(cache=True)
def _fill_record(rec, p, x, y, local, theta, ct, yaw, kw, x0, diameter):
    rec[p, _WX] = x
    rec[p, _WY] = y
    rec[p, _FCOS] = math.cos(local)
    rec[p, _FSIN] = math.sin(local)
    rec[p, _NCOS] = math.cos(theta)
    rec[p, _NSIN] = math.sin(theta)
    rec[p, _CT] = ct
    rec[p, _YAW] = yaw
    rec[p, _KW] = kw
    rec[p, _X0] = x0
    cosg = math.cos(math.radians(yaw))
    rec[p, _COSG] = cosg
    rec[p, _TANT] = 0.0
    rec[p, _COEF] = 0.0
    rec[p, _LOG0] = 0.0
    if ct > 0.0 and yaw != 0.0 and cosg > 1e-12:
        th = initial_skew_angle(yaw, ct)
        rec[p, _TANT] = math.tan(th)
        rec[p, _COEF] = th / 14.7 * math.sqrt(cosg / (kw * kw * ct)) * (2.9 + 1.3 * math.sqrt(1.0 - ct) - ct)
        sy0, sz0 = wake_widths(x0, yaw, kw, x0, diameter)
        rec[p, _LOG0] = _far_wake_log(sy0, sz0, ct, cosg, diameter)


@njit(cache=True)
def _wake_at(rec, q, xs, ys, z, diameter, hub_height):
    """Deficit, clamp flag, widths and deflection of wake ``q`` at wake-frame point (xs, ys, z)."""
    kw = rec[q, _KW]
    x0 = rec[q, _X0]
    cosg = rec[q, _COSG]
    ct = rec[q, _CT]
    growth = kw * softplus((xs - x0) / diameter)
    sy = diameter * (NEAR_WAKE_WIDTH * cosg + growth)
    sz = diameter * (NEAR_WAKE_WIDTH + growth)
    if rec[q, _TANT] == 0.0:
        d = 0.0
    elif xs <= x0:
        d = xs * rec[q, _TANT]
    else:
        d = x0 * rec[q, _TANT] + rec[q, _COEF] * (_far_wake_log(sy, sz, ct, cosg, diameter) - rec[q, _LOG0]) * diameter
    r = 1.0 - ct * cosg / (8.0 * sy * sz / (diameter * diameter))
    flag = r < 0.0
    amp = 1.0 if flag else 1.0 - math.sqrt(r)
    ez = (z - hub_height) / sz
    ey = (ys - d) / sy
    return amp * math.exp(-0.5 * (ez * ez + ey * ey)), flag, amp, sy, sz, d


@njit(cache=True)
def _merge_point(px, py, pz, u, v, n_done, rec, diameter, hub_height, deficit_scale):
    flagged = 0
    for q in range(n_done):
        if rec[q, _CT] <= 0.0:
            continue
        dx = px - rec[q, _WX]
        dy = py - rec[q, _WY]
        xs = dx * rec[q, _FCOS] + dy * rec[q, _FSIN]
        if xs <= _X_EPS:
            continue
        ys = dx * rec[q, _FSIN] - dy * rec[q, _FCOS]
        w, flag, amp, sy, sz, d = _wake_at(rec, q, xs, ys, pz, diameter, hub_height)
        if flag:
            flagged += 1
        w *= deficit_scale
        nc = rec[q, _NCOS]
        ns = rec[q, _NSIN]
        un = (u * nc + v * ns) * (1.0 - w)
        up = -u * ns + v * nc
        u = un * nc - up * ns
        v = un * ns + up * nc
    return u, v, flagged


@njit(cache=True)
def _solve(px, py, order, flow_angle, speed, yaw, avail, ct_fixed, ct_u, ct_v, cut_in, cut_out,
           k_a, k_b, alpha, beta, ti_amb, diameter, hub_height, deficit_scale, qlat, qvert):
    n = px.size
    radius = 0.5 * diameter
    ub = speed * math.cos(flow_angle)
    vb = speed * math.sin(flow_angle)
    rec = np.zeros((n, _N_REC))

    rotor_speed = np.zeros(n)
    ct = np.zeros(n)
    ti = np.zeros(n)
    heading = np.zeros(n)
    kw_out = np.zeros(n)
    x0_out = np.zeros(n)
    dom_src = np.full(n, -1)
    dom_depth = np.zeros(n)
    dom_width = np.zeros(n)
    dom_offset = np.zeros(n)
    flagged = 0

    for p in range(n):
        j = order[p]
        xj = px[j]
        yj = py[j]
        uh, vh, f = _merge_point(xj, yj, hub_height, ub, vb, p, rec, diameter, hub_height, deficit_scale)
        flagged += f
        if uh == 0.0 and vh == 0.0:
            local = flow_angle
        else:
            local = math.atan2(vh, uh)
        theta = local + math.radians(yaw[j])
        lx = -math.sin(theta)
        ly = math.cos(theta)

        s = 0.0
        for k in range(qlat.size):
            qx = xj + radius * qlat[k] * lx
            qy = yj + radius * qlat[k] * ly
            qz = hub_height + radius * qvert[k]
            uq, vq, f = _merge_point(qx, qy, qz, ub, vb, p, rec, diameter, hub_height, deficit_scale)
            flagged += f
            s += math.sqrt(uq * uq + vq * vq)
        s /= qlat.size

        if not avail[j] or s < cut_in or s > cut_out:
            c = 0.0
        elif not math.isnan(ct_fixed[j]):
            c = ct_fixed[j]
        else:
            c = np.interp(s, ct_u, ct_v)

        # turbulence: strongest upstream contributor, weighted by lateral overlap;
        # dominant wake: largest hub-height deficit at this rotor centre
        add_max = 0.0
        best = 0.0
        for q in range(p):
            if rec[q, _CT] <= 0.0:
                continue
            dx = xj - rec[q, _WX]
            dy = yj - rec[q, _WY]
            xs = dx * rec[q, _FCOS] + dy * rec[q, _FSIN]
            if xs <= _X_EPS:
                continue
            ys = dx * rec[q, _FSIN] - dy * rec[q, _FCOS]
            w, f, amp, sy, sz, d = _wake_at(rec, q, xs, ys, hub_height, diameter, hub_height)
            lat = (ys - d) / sy
            add = added_turbulence(rec[q, _CT], ti_amb, xs, diameter) * math.exp(-0.5 * lat * lat)
            if add > add_max:
                add_max = add
            if w > best:
                best = w
                dom_src[j] = order[q]
                dom_depth[j] = amp * deficit_scale
                dom_width[j] = (sy + sz) / diameter
                dom_offset[j] = (d - ys) / diameter
        t = math.sqrt(ti_amb * ti_amb + add_max * add_max)

        if c > 0.0:
            kw = wake_expansion(t, k_a, k_b)
            x0 = near_wake_length(c, yaw[j], t, alpha, beta, diameter)
        else:
            kw = 0.0
            x0 = 0.0
        _fill_record(rec, p, xj, yj, local, theta, c, yaw[j], kw, x0, diameter)

        rotor_speed[j] = s
        ct[j] = c
        ti[j] = t
        heading[j] = theta
        kw_out[j] = kw
        x0_out[j] = x0

    return (rotor_speed, ct, ti, heading, kw_out, x0_out, dom_src, dom_depth, dom_width,
            dom_offset, flagged, rec)


@njit(cache=True)
def _field(xs, ys, zs, flow_angle, speed, rec, diameter, hub_height, deficit_scale):
    ub = speed * math.cos(flow_angle)
    vb = speed * math.sin(flow_angle)
    out = np.zeros((xs.size, 2))
    for k in range(xs.size):
        u, v, f = _merge_point(xs[k], ys[k], zs[k], ub, vb, rec.shape[0], rec, diameter, hub_height, deficit_scale)
        out[k, 0] = u
        out[k, 1] = v
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FarmSolution:
    """Converged farm state; doubles as the flow-field evaluator."""

    rotor_speed: np.ndarray
    ct: np.ndarray
    ti_rotor: np.ndarray
    heading: np.ndarray  # rotor-normal heading, degrees
    k_w: np.ndarray
    x0: np.ndarray
    power: np.ndarray
    dominant_source: np.ndarray
    wake_depth: np.ndarray
    wake_width: np.ndarray
    wake_offset: np.ndarray
    flagged: int
    background_speed: float
    flow_angle: float
    _records: np.ndarray = field(repr=False)
    _geometry: tuple = field(repr=False)

    def velocity(self, x, y, z=None) -> np.ndarray:
        """Planar velocity (N, 2) at arbitrary points after all wakes are merged."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        diameter, hub_height, deficit_scale = self._geometry
        z = np.full(x.shape, hub_height) if z is None else np.broadcast_to(np.asarray(z, float), x.shape).ravel()
        return _field(x, y, np.ascontiguousarray(z), self.flow_angle, self.background_speed,
                      self._records, diameter, hub_height, deficit_scale)

    def speed(self, x, y, z=None) -> np.ndarray:
        return np.hypot(*self.velocity(x, y, z).T)

    @property
    def farm_power(self) -> float:
        return float(np.sum(self.power))


@dataclass(frozen=True)
class FarmModel:
    """Analytical farm model: turbine, layout, calibration vector and power options."""

    turbine: TurbineSpec
    layout: FarmLayout
    params: WakeParams = WakeParams()
    apply_eta: bool = True
    deficit_scale: float = 1.0
    power_scaling: float | None = None

    @property
    def n_turbines(self) -> int:
        return self.layout.n_turbines

    def with_params(self, params: WakeParams) -> "FarmModel":
        return FarmModel(self.turbine, self.layout, params, self.apply_eta, self.deficit_scale, self.power_scaling)

    def solve(self, ambient: AmbientState, control: ControlState, ct_fixed=None) -> FarmSolution:
        return merge_wakes(self, ambient, control, ct_fixed)

    def power(self, speed, yaw, air_density, available) -> np.ndarray:
        p = turbine_power(speed, yaw, self.turbine, air_density, self.apply_eta, available)
        if self.power_scaling is not None and self.apply_eta:
            p = p * self.power_scaling / self.turbine.power_scaling
        return p


def merge_wakes(model: FarmModel, ambient: AmbientState, control: ControlState, ct_fixed=None) -> FarmSolution:
    """Solve the farm recursion and return the merged field with per-turbine states.

    ``ct_fixed`` (NaN entries are looked up) freezes thrust coefficients, e.g. at
    the operating point before an optimisation.
    """
    t = model.turbine
    lay = model.layout
    n = lay.n_turbines
    if control.yaw.size != n:
        raise ValueError("control vector length does not match the layout")
    order = downstream_order(lay, ambient.wind_direction).astype(np.int64)
    fv = ambient.flow_vector
    flow_angle = math.atan2(fv[1], fv[0])
    ct_u, ct_v, _, _ = t.tables()
    if ct_fixed is None:
        ct_fixed = np.full(n, np.nan)
    k = model.params
    out = _solve(
        np.asarray(lay.x, float), np.asarray(lay.y, float), order, flow_angle,
        float(ambient.background_speed), control.yaw.astype(float), control.availability.astype(np.bool_),
        np.asarray(ct_fixed, float), ct_u, ct_v, t.cut_in, t.cut_out,
        k.k_a, k.k_b, k.alpha, k.beta, ambient.ambient_ti, t.rotor_diameter, t.hub_height,
        float(model.deficit_scale), QUAD_LAT, QUAD_VERT,
    )
    (speed, ct, ti, heading, kw, x0, src, depth, width, offset, flagged, records) = out
    power = model.power(speed, control.yaw, ambient.air_density, control.availability)
    return FarmSolution(
        rotor_speed=speed, ct=ct, ti_rotor=ti, heading=np.degrees(heading), k_w=kw, x0=x0,
        power=power, dominant_source=src, wake_depth=depth, wake_width=width, wake_offset=offset,
        flagged=int(flagged), background_speed=float(ambient.background_speed), flow_angle=flow_angle,
        _records=records, _geometry=(t.rotor_diameter, t.hub_height, float(model.deficit_scale)),
    )


def export_flow_csv(solution: FarmSolution, path, x_range, y_range, resolution: float = 20.0) -> None:
    """Hub-height speed raster as ``x,y,speed`` rows."""
    xs = np.arange(x_range[0], x_range[1] + resolution / 2, resolution)
    ys = np.arange(y_range[0], y_range[1] + resolution / 2, resolution)
    gx, gy = np.meshgrid(xs, ys)
    s = solution.speed(gx.ravel(), gy.ravel())
    np.savetxt(path, np.column_stack([gx.ravel(), gy.ravel(), s]), delimiter=",",
               header="x,y,speed", comments="", fmt="%.6f")
