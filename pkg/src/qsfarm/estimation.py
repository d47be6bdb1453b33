"""Background wind-speed estimation and ridge-regularised online calibration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .farm import FarmModel
from .turbine import AmbientState, ControlState, MeasurementWindow
from .wake import WakeParams

log = logging.getLogger(__name__)

UPSTREAM_THRESHOLD = 1e-3
REFERENCE_SPEED = 8.0
KAPPA_LOWER = (0.0, 0.001, 0.5, 0.01)
KAPPA_UPPER = (1.0, 0.1, 5.0, 0.5)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def upstream_set(model: FarmModel, ambient: AmbientState, availability=None,
                 threshold: float = UPSTREAM_THRESHOLD) -> np.ndarray:
    """Available turbines whose modelled rotor-average deficit is below ``threshold``.

    Evaluated at zero yaw and a reference speed, so membership depends on the
    layout, wind direction and availability only.
    """
    n = model.n_turbines
    avail = np.ones(n, bool) if availability is None else np.asarray(availability, bool)
    sol = model.solve(ambient.with_speed(REFERENCE_SPEED), ControlState(np.zeros(n), avail))
    deficit = 1.0 - sol.rotor_speed / REFERENCE_SPEED
    members = np.nonzero(avail & (deficit < threshold))[0]
    if members.size == 0:
        raise ValueError("no undisturbed available turbine to estimate the background flow from")
    return members


def rated_speed(model: FarmModel, tol: float = 1e-3) -> float:
    """Lowest speed at which the single-turbine power curve comes within ``tol`` of its maximum."""
    t = model.turbine
    u = np.linspace(t.cut_in, t.cut_out, 2101)
    p = model.power(u, np.zeros(u.size), 1.225, np.ones(u.size, bool))
    return float(u[np.argmax(p >= (1.0 - tol) * p.max())])


def golden_section(fun, lo: float, hi: float, tol: float = 1e-3) -> float:
    """Minimiser of a unimodal function on [lo, hi] to within ``tol``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def estimate_background(window: MeasurementWindow, model: FarmModel, ambient: AmbientState,
                        members, tol: float = 1e-3, scan: int = 85) -> float:
    """Background speed minimising the mean squared power mismatch of undisturbed turbines.

    Power is monotone up to rated and only ripples around rated power above it,
    so the search runs from cut-in to the first speed reaching rated power: the
    lowest speed consistent with the data. A coarse scan brackets the minimum,
    then golden-section search refines it.
    """
    members = np.asarray(members, dtype=int)
    if members.size == 0:
        raise ValueError("empty upstream set")
    p_meas = window.power[members]
    if not np.any(p_meas > 0):
        raise ValueError("all upstream powers are zero")
    yaw = window.yaw[members]
    t = model.turbine
    ones = np.ones(members.size, bool)

    def mismatch(u):
        return float(np.mean((p_meas - model.power(np.full(members.size, u), yaw, ambient.air_density, ones)) ** 2))

    grid = np.linspace(t.cut_in, rated_speed(model), scan)
    vals = np.array([mismatch(u) for u in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, scan - 1)]
    return golden_section(mismatch, lo, hi, tol)


@dataclass(frozen=True)
class CalibrationConfig:
    ridge: float = 2.0
    lower: tuple = KAPPA_LOWER
    upper: tuple = KAPPA_UPPER
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_evals: int = 400

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge parameter must be non-negative")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("empty calibration bounds")


@dataclass(frozen=True)
class CalibrationRecord:
    timestamp: float
    kappa_before: np.ndarray
    kappa_after: np.ndarray
    rms_before: float  # W
    rms_after: float  # W
    objective_before: float
    objective_after: float
    degenerate: bool = False
    evaluations: int = 0
    message: str = field(default="")

    @property
    def params(self) -> WakeParams:
        return WakeParams.from_array(self.kappa_after)


def _residuals(kappa, model, ambient, control, p_meas, mask, ridge):
    sol = model.with_params(WakeParams.from_array(kappa)).solve(ambient, control)
    n = int(mask.sum())
    data = (p_meas[mask] - sol.power[mask]) / 1e6 / math.sqrt(n)
    return np.concatenate([data, math.sqrt(ridge) * np.asarray(kappa, float)])


def ridge_objective(kappa, model: FarmModel, ambient: AmbientState, window: MeasurementWindow,
                    availability=None, ridge: float = 2.0) -> float:
    """Mean squared power error in MW^2 plus ridge * |kappa|^2."""
    control, mask = _control(window, availability)
    r = _residuals(kappa, model, ambient, control, window.power, mask, ridge)
    return float(r @ r)


def _control(window, availability):
    n = window.power.size
    avail = np.ones(n, bool) if availability is None else np.asarray(availability, bool)
    return ControlState(window.yaw, avail), avail


def power_rms(kappa, model: FarmModel, ambient: AmbientState, window: MeasurementWindow,
              availability=None) -> float:
    """Root-mean-square power error in W over available turbines."""
    control, mask = _control(window, availability)
    sol = model.with_params(WakeParams.from_array(kappa)).solve(ambient, control)
    return float(np.sqrt(np.mean((window.power[mask] - sol.power[mask]) ** 2)))


def calibrate(window: MeasurementWindow, model: FarmModel, ambient: AmbientState,
              kappa_prev: WakeParams | None = None, availability=None,
              config: CalibrationConfig = CalibrationConfig(), timestamp: float = 0.0) -> CalibrationRecord:
    """Bounded least-squares fit of the wake parameters, warm-started at ``kappa_prev``.

    Only available turbines enter the data term. If none of them is waked the
    powers carry no information on the wake parameters and ``kappa_prev`` is
    returned with the degenerate flag. The result never scores worse than the
    warm start.
    """
    kappa_prev = model.params if kappa_prev is None else kappa_prev
    control, mask = _control(window, availability)
    if not mask.any():
        raise ValueError("no available turbine to calibrate against")
    k0 = np.clip(kappa_prev.as_array(), config.lower, config.upper)
    base = model.with_params(WakeParams.from_array(k0)).solve(ambient, control)
    args = (model, ambient, control, window.power, mask, config.ridge)
    r0 = _residuals(k0, *args)
    f0 = float(r0 @ r0)
    rms0 = power_rms(k0, model, ambient, window, mask)
    if not np.any(mask & (base.dominant_source >= 0)):
        log.warning("no waked turbine in the window; calibration skipped")
        return CalibrationRecord(timestamp, k0, k0.copy(), rms0, rms0, f0, f0, True, 0, "degenerate")

    # work in bound-normalised coordinates so all four parameters move on one scale
    lo, hi = np.asarray(config.lower), np.asarray(config.upper)
    span = hi - lo

    def fun(z):
        return _residuals(lo + span * z, *args)

    res = least_squares(fun, (k0 - lo) / span, bounds=(0.0, 1.0), method="trf",
                        xtol=config.xtol, ftol=config.ftol, gtol=1e-12,
                        max_nfev=config.max_evals, diff_step=1e-6)
    k1 = lo + span * np.clip(res.x, 0.0, 1.0)
    r1 = fun(np.clip(res.x, 0.0, 1.0))
    f1 = float(r1 @ r1)
    if not f1 <= f0:
        k1, f1 = k0.copy(), f0
    rms1 = power_rms(k1, model, ambient, window, mask)
    return CalibrationRecord(timestamp, k0, k1, rms0, rms1, f0, f1, False, int(res.nfev), res.message)
