"""Single-turbine yawed Gaussian wake.

All functions are scalar and compiled with numba so the farm recursion can call
them in a tight loop. Angles are in degrees at this interface, distances in metres.

Wake frame of a turbine: origin at the rotor centre, X downstream along the
incoming flow, Y horizontal pointing to the right of the flow, Z vertical
(absolute height). With this orientation a positive yaw angle (rotor turned
counter-clockwise seen from above) deflects the wake towards +Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

NEAR_WAKE_WIDTH = 0.35
CRESPO_PREFACTOR = 0.73


@dataclass(frozen=True)
class WakeParams:
    """Calibration vector: expansion slope/offset and near-wake coefficients."""

    k_a: float = 0.38
    k_b: float = 0.004
    alpha: float = 2.32
    beta: float = 0.154

    def as_array(self) -> np.ndarray:
        return np.array([self.k_a, self.k_b, self.alpha, self.beta], dtype=float)

    @classmethod
    def from_array(cls, v) -> "WakeParams":
        return cls(*(float(x) for x in v))


@njit(cache=True)
def wake_expansion(ti_rotor, k_a, k_b):
    k_w = k_a * ti_rotor + k_b
    if k_w <= 0.0:
        raise ValueError("non-positive wake expansion rate")
    return k_w


@njit(cache=True)
def near_wake_length(ct, yaw, ti_rotor, alpha, beta, diameter):
    """Onset of the far wake, in metres."""
    root = math.sqrt(1.0 - ct)
    radicand = 2.0 * (4.0 * alpha * ti_rotor + 2.0 * beta * (1.0 - root))
    if radicand <= 0.0:
        raise ValueError("non-positive near-wake radicand")
    return diameter * math.cos(math.radians(yaw)) * (1.0 + root) / math.sqrt(radicand)


@njit(cache=True)
def softplus(z):
    if z > 30.0:
        return z
    return math.log1p(math.exp(z))


@njit(cache=True)
def wake_widths(x, yaw, k_w, x0, diameter):
    growth = k_w * softplus((x - x0) / diameter)
    sigma_y = diameter * (NEAR_WAKE_WIDTH * math.cos(math.radians(yaw)) + growth)
    sigma_z = diameter * (NEAR_WAKE_WIDTH + growth)
    return sigma_y, sigma_z


@njit(cache=True)
def initial_skew_angle(yaw, ct):
    """Wake skew angle behind the rotor, radians."""
    g = math.radians(yaw)
    c = math.cos(g)
    return 0.3 * g / c * (1.0 - math.sqrt(1.0 - ct * c))


@njit(cache=True)
def _far_wake_log(sigma_y, sigma_z, ct, cos_g, diameter):
    s = 1.6 * math.sqrt(8.0 * sigma_y * sigma_z / (diameter * diameter * cos_g))
    rc = math.sqrt(ct)
    return math.log((1.6 + rc) * (s - rc) / ((1.6 - rc) * (s + rc)))


@njit(cache=True)
def deflection(x, yaw, ct, k_w, x0, sigma_y, sigma_z, diameter):
    """Lateral offset of the wake centre at downstream distance ``x``.

    Linear growth along the skew angle in the near wake; beyond ``x0`` the
    logarithmic far-wake term is added, shifted so the centreline is
    continuous at ``x0``.
    """
    if yaw == 0.0 or ct <= 0.0 or x <= 0.0:
        return 0.0
    cos_g = math.cos(math.radians(yaw))
    if cos_g <= 1e-12:
        return 0.0
    theta = initial_skew_angle(yaw, ct)
    if x <= x0:
        return x * math.tan(theta)
    sy0, sz0 = wake_widths(x0, yaw, k_w, x0, diameter)
    coeff = (
        theta / 14.7 * math.sqrt(cos_g / (k_w * k_w * ct)) * (2.9 + 1.3 * math.sqrt(1.0 - ct) - ct)
    )
    far = _far_wake_log(sigma_y, sigma_z, ct, cos_g, diameter) - _far_wake_log(
        sy0, sz0, ct, cos_g, diameter
    )
    return x0 * math.tan(theta) + coeff * far * diameter


@njit(cache=True)
def deficit_amplitude(yaw, ct, sigma_y, sigma_z, diameter):
    """Centreline deficit; flag is True when the radicand was negative and the value clamped to 1."""
    r = 1.0 - ct * math.cos(math.radians(yaw)) / (8.0 * sigma_y * sigma_z / (diameter * diameter))
    if r < 0.0:
        return 1.0, True
    return 1.0 - math.sqrt(r), False


@njit(cache=True)
def deficit(y, z, yaw, ct, sigma_y, sigma_z, delta, hub_height, diameter):
    """Fractional velocity deficit at wake-frame lateral position ``y`` and height ``z``."""
    amp, flag = deficit_amplitude(yaw, ct, sigma_y, sigma_z, diameter)
    ez = (z - hub_height) / sigma_z
    ey = (y - delta) / sigma_y
    return amp * math.exp(-0.5 * (ez * ez + ey * ey)), flag


@njit(cache=True)
def added_turbulence(ct, ti_ambient, x, diameter):
    """Wake-added turbulence intensity at distance ``x`` behind a rotor."""
    if ct <= 0.0 or x <= 0.0:
        return 0.0
    a = 0.5 * (1.0 - math.sqrt(1.0 - ct))
    return CRESPO_PREFACTOR * a**0.8325 * ti_ambient**0.0325 * (x / diameter) ** -0.32


@njit(cache=True)
def rotor_turbulence(ct, ti_ambient, x, diameter):
    """Ambient and added turbulence combined in quadrature."""
    add = added_turbulence(ct, ti_ambient, x, diameter)
    return math.sqrt(ti_ambient * ti_ambient + add * add)
