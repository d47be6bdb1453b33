"""Plain-Python reference evaluation of the farm recursion, used as a test oracle.

Written from the model equations only; shares no code with the compiled kernel.
"""

import math

import numpy as np


def x0_ref(ct, yaw, ti, alpha, beta, d):
    g = math.radians(yaw)
    r = math.sqrt(1 - ct)
    return d * math.cos(g) * (1 + r) / math.sqrt(2 * (4 * alpha * ti + 2 * beta * (1 - r)))


def widths_ref(x, yaw, kw, x0, d):
    t = kw * math.log(1 + math.exp((x - x0) / d))
    return d * (0.35 * math.cos(math.radians(yaw)) + t), d * (0.35 + t)


def deflection_ref(x, yaw, ct, kw, x0, d):
    if yaw == 0 or ct == 0:
        return 0.0
    g = math.radians(yaw)
    c = math.cos(g)
    theta = 0.3 * g / c * (1 - math.sqrt(1 - ct * c))
    if x <= x0:
        return x * math.tan(theta)

    def log_term(xx):
        sy, sz = widths_ref(xx, yaw, kw, x0, d)
        s = 1.6 * math.sqrt(8 * sy * sz / (d * d * c))
        rc = math.sqrt(ct)
        return math.log((1.6 + rc) * (s - rc) / ((1.6 - rc) * (s + rc)))

    coef = theta / 14.7 * math.sqrt(c / (kw**2 * ct)) * (2.9 + 1.3 * math.sqrt(1 - ct) - ct)
    return x0 * math.tan(theta) + d * coef * (log_term(x) - log_term(x0))


def deficit_ref(x, y, z, yaw, ct, kw, x0, zh, d):
    if x <= 1e-6 or ct == 0:
        return 0.0
    sy, sz = widths_ref(x, yaw, kw, x0, d)
    delta = deflection_ref(x, yaw, ct, kw, x0, d)
    amp = 1 - math.sqrt(1 - ct * math.cos(math.radians(yaw)) / (8 * sy * sz / d**2))
    return amp * math.exp(-0.5 * ((z - zh) / sz) ** 2 - 0.5 * ((y - delta) / sy) ** 2)


def crespo_ref(ct, ti, x, d):
    a = (1 - math.sqrt(1 - ct)) / 2
    return 0.73 * a**0.8325 * ti**0.0325 * (x / d) ** -0.32


class ReferenceFarm:
    """Sequential recursion on explicit vectors, one turbine at a time."""

    def __init__(self, xs, ys, spec, kappa=(0.38, 0.004, 2.32, 0.154)):
        self.xs = list(xs)
        self.ys = list(ys)
        self.spec = spec
        self.kappa = kappa
        self.wakes = []

    def _wake_frame(self, w, px, py):
        dx, dy = px - w["x"], py - w["y"]
        f = w["flow"]
        return dx * math.cos(f) + dy * math.sin(f), dx * math.sin(f) - dy * math.cos(f)

    def velocity(self, px, py, pz, ub, upto=None):
        u = np.array(ub, dtype=float)
        for w in self.wakes[: len(self.wakes) if upto is None else upto]:
            xw, yw = self._wake_frame(w, px, py)
            wd = deficit_ref(xw, yw, pz, w["yaw"], w["ct"], w["kw"], w["x0"], self.spec.hub_height,
                             self.spec.rotor_diameter)
            e_perp = np.array([math.cos(w["theta"]), math.sin(w["theta"])])
            e_par = np.array([-math.sin(w["theta"]), math.cos(w["theta"])])
            u = (u @ e_perp) * (1 - wd) * e_perp + (u @ e_par) * e_par
        return u

    def solve(self, speed, direction, ti, yaw, avail=None, quad=None):
        d = self.spec.rotor_diameter
        zh = self.spec.hub_height
        n = len(self.xs)
        avail = [True] * n if avail is None else list(avail)
        phi = math.radians(direction)
        ub = speed * np.array([-math.sin(phi), -math.cos(phi)])
        stream = [round(x * ub[0] / speed + y * ub[1] / speed, 6) for x, y in zip(self.xs, self.ys)]
        order = sorted(range(n), key=lambda i: (stream[i], i))
        self.wakes = []
        out = {"speed": [0.0] * n, "ct": [0.0] * n, "ti": [0.0] * n}
        for j in order:
            x, y = self.xs[j], self.ys[j]
            hub = self.velocity(x, y, zh, ub)
            local = math.atan2(hub[1], hub[0])
            theta = local + math.radians(yaw[j])
            lat_dir = (-math.sin(theta), math.cos(theta))
            s = 0.0
            for ql, qv in zip(*quad):
                p = self.velocity(x + d / 2 * ql * lat_dir[0], y + d / 2 * ql * lat_dir[1], zh + d / 2 * qv, ub)
                s += math.hypot(*p)
            s /= len(quad[0])
            ct = float(self.spec.ct(s)) if avail[j] else 0.0
            add = 0.0
            for w in self.wakes:
                if w["ct"] == 0:
                    continue
                xw, yw = self._wake_frame(w, x, y)
                if xw <= 1e-6:
                    continue
                sy, _ = widths_ref(xw, w["yaw"], w["kw"], w["x0"], d)
                delta = deflection_ref(xw, w["yaw"], w["ct"], w["kw"], w["x0"], d)
                add = max(add, crespo_ref(w["ct"], ti, xw, d) * math.exp(-0.5 * ((yw - delta) / sy) ** 2))
            t = math.hypot(ti, add)
            ka, kb, al, be = self.kappa
            kw = ka * t + kb if ct > 0 else 0.0
            x0 = x0_ref(ct, yaw[j], t, al, be, d) if ct > 0 else 0.0
            self.wakes.append(dict(x=x, y=y, flow=local, theta=theta, yaw=yaw[j], ct=ct, kw=kw, x0=x0))
            out["speed"][j] = s
            out["ct"][j] = ct
            out["ti"][j] = t
        return {k: np.array(v) for k, v in out.items()}
