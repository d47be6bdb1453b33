import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsfarm.estimation import (
    KAPPA_LOWER,
    CalibrationConfig,
    calibrate,
    estimate_background,
    golden_section,
    power_rms,
    ridge_objective,
    upstream_set,
)
from qsfarm.farm import FarmModel
from qsfarm.turbine import AmbientState, ControlState, FarmLayout, MeasurementWindow, tc_like_layout
from qsfarm.wake import WakeParams

D = 178.3
TRUE = WakeParams(0.30, 0.006, 2.0, 0.2)


def column(turbine, n=8):
    return FarmModel(turbine, FarmLayout.from_arrays([i * 5 * D for i in range(n)], [0] * n))


def window_from(model, ambient, yaw, avail=None, noise=0.0, seed=0):
    n = model.n_turbines
    avail = np.ones(n, bool) if avail is None else avail
    p = model.solve(ambient, ControlState(yaw, avail)).power
    if noise:
        p = p * (1 + noise * np.random.default_rng(seed).standard_normal(n))
    return MeasurementWindow(600.0, p, np.asarray(yaw, float), np.ones(n))


def test_upstream_sets(turbine):
    amb = AmbientState(8.0, 270.0, 0.06)
    single = FarmModel(turbine, FarmLayout.from_arrays([0], [0]))
    assert upstream_set(single, amb).tolist() == [0]
    pair = FarmModel(turbine, FarmLayout.from_arrays([0, 5 * D], [0, 0]))
    assert upstream_set(pair, amb).tolist() == [0]
    assert upstream_set(pair, AmbientState(8.0, 90.0, 0.06)).tolist() == [1]


def test_upstream_set_tc_layout_rotated(turbine):
    lay = tc_like_layout(D, 90.0)
    model = FarmModel(turbine, lay)
    amb = AmbientState(8.0, 270.0, 0.06)
    members = upstream_set(model, amb)
    # brute force: the 8 turbines with the smallest streamwise coordinate
    x = np.round(np.asarray(lay.x), 6)
    front = np.nonzero(x == x.min())[0]
    assert front.size == 8
    assert members.tolist() == front.tolist()


def test_upstream_set_follows_availability(turbine):
    pair = FarmModel(turbine, FarmLayout.from_arrays([0, 5 * D], [0, 0]))
    amb = AmbientState(8.0, 270.0, 0.06)
    assert upstream_set(pair, amb, [False, True]).tolist() == [1]
    with pytest.raises(ValueError):
        upstream_set(pair, amb, [False, False])


def test_golden_section():
    assert golden_section(lambda x: (x - 2.345) ** 2, 0, 10, 1e-6) == pytest.approx(2.345, abs=1e-6)


@pytest.mark.parametrize("speed", [6.0, 8.0, 9.4, 11.3])
def test_background_round_trip(turbine, speed):
    m = column(turbine)
    amb = AmbientState(speed, 270.0, 0.06)
    w = window_from(m, amb, np.zeros(8))
    est = estimate_background(w, m, AmbientState(8.0, 270.0, 0.06), [0])
    assert est == pytest.approx(speed, abs=0.01)


def test_background_yaw_aware(turbine):
    m = FarmModel(turbine, FarmLayout.from_arrays([0], [0]), apply_eta=False)
    p0 = m.power(np.array([9.4]), np.zeros(1), 1.225, np.ones(1, bool))
    w = MeasurementWindow(600.0, p0 * math.cos(math.radians(20)) ** 3, np.array([20.0]), np.ones(1))
    assert estimate_background(w, m, AmbientState(8.0), [0]) == pytest.approx(9.4, abs=0.01)


def test_background_noise_monte_carlo(turbine):
    m = FarmModel(turbine, tc_like_layout(D, 90.0))
    amb = AmbientState(9.4, 270.0, 0.06)
    members = upstream_set(m, amb)
    base = m.solve(amb, ControlState.greedy(32)).power
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        p = base * (1 + 0.02 * rng.standard_normal(32))
        w = MeasurementWindow(600.0, p, np.zeros(32), np.ones(32))
        worst = max(worst, abs(estimate_background(w, m, amb, members) - 9.4))
    assert worst < 0.1


def test_background_errors(turbine):
    m = column(turbine, 2)
    w = MeasurementWindow(600.0, np.zeros(2), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        estimate_background(w, m, AmbientState(8.0), [0])
    with pytest.raises(ValueError):
        estimate_background(w, m, AmbientState(8.0), [])


def test_twin_experiment_exact(turbine):
    m = column(turbine)
    amb = AmbientState(9.4, 270.0, 0.06)
    w = window_from(m.with_params(TRUE), amb, np.zeros(8))
    r = calibrate(w, m, amb, WakeParams(), config=CalibrationConfig(ridge=0.0))
    assert np.allclose(r.kappa_after, TRUE.as_array(), rtol=0.05)
    assert r.rms_after < 1e-3 * r.rms_before


def test_ridge_limit_drives_to_lower_bounds(turbine):
    m = column(turbine)
    amb = AmbientState(9.4, 270.0, 0.06)
    w = window_from(m.with_params(TRUE), amb, np.zeros(8))
    r = calibrate(w, m, amb, WakeParams(), config=CalibrationConfig(ridge=1e9))
    assert np.allclose(r.kappa_after, KAPPA_LOWER, atol=1e-6)
    # with the lower bounds relaxed to zero, the limit is the zero vector
    cfg = CalibrationConfig(ridge=1e9, lower=(0.0, 1e-9, 1e-9, 1e-9))
    r = calibrate(w, m, amb, WakeParams(), config=cfg)
    assert np.all(np.abs(r.kappa_after) < 1e-4)


def test_calibration_never_worse_than_warm_start(turbine):
    m = column(turbine)
    amb = AmbientState(9.4, 270.0, 0.06)
    for seed in range(5):
        w = window_from(m.with_params(TRUE), amb, np.zeros(8), noise=0.03, seed=seed)
        r = calibrate(w, m, amb, WakeParams(), config=CalibrationConfig(ridge=2.0))
        assert r.objective_after <= r.objective_before
        assert r.objective_after == pytest.approx(ridge_objective(r.kappa_after, m, amb, w, ridge=2.0))
        assert r.rms_after < r.rms_before
        assert np.all(r.kappa_after >= KAPPA_LOWER)


def test_calibration_uses_available_turbines_only(turbine):
    m = column(turbine, 4)
    amb = AmbientState(9.4, 270.0, 0.06)
    avail = np.array([1, 1, 0, 1], bool)
    w = window_from(m.with_params(TRUE), amb, np.zeros(4), avail)
    junk = w.power.copy()
    junk[2] = 1e12
    w2 = MeasurementWindow(600.0, junk, w.yaw, w.completeness)
    a = calibrate(w, m, amb, WakeParams(), avail, CalibrationConfig(ridge=0.0))
    b = calibrate(w2, m, amb, WakeParams(), avail, CalibrationConfig(ridge=0.0))
    assert np.array_equal(a.kappa_after, b.kappa_after)
    assert power_rms(a.kappa_after, m, amb, w, avail) < 1.0


def test_degenerate_calibration_keeps_prior(turbine):
    m = FarmModel(turbine, FarmLayout.from_arrays([0, 0], [0, 5 * D]))
    amb = AmbientState(9.4, 270.0, 0.06)
    w = window_from(m, amb, np.zeros(2))
    prior = WakeParams(0.4, 0.01, 3.0, 0.3)
    r = calibrate(w, m, amb, prior)
    assert r.degenerate and np.array_equal(r.kappa_after, prior.as_array())


def test_deterministic(turbine):
    m = column(turbine, 5)
    amb = AmbientState(9.4, 270.0, 0.06)
    w = window_from(m.with_params(TRUE), amb, np.zeros(5), noise=0.03)
    a = calibrate(w, m, amb)
    b = calibrate(w, m, amb)
    assert np.array_equal(a.kappa_after, b.kappa_after)


def test_config_validation():
    with pytest.raises(ValueError):
        CalibrationConfig(ridge=-1)


@settings(max_examples=25, deadline=None)
@given(st.floats(4.5, 11.3), st.floats(-30, 30))
def test_estimation_exact_in_region_two(turbine, speed, yaw):
    m = FarmModel(turbine, FarmLayout.from_arrays([0, 5 * D], [0, 0]))
    amb = AmbientState(speed, 270.0, 0.06)
    w = window_from(m, amb, np.array([yaw, 0.0]))
    assert estimate_background(w, m, amb, upstream_set(m, amb)) == pytest.approx(speed, abs=1e-3)


@settings(max_examples=20, deadline=None)
@given(st.floats(-30, 30), st.floats(0, 359))
def test_upstream_set_ignores_member_yaw(turbine, yaw, phi):
    # membership is decided at zero yaw; any yaw on a member leaves it upstream
    m = FarmModel(turbine, FarmLayout.grid(2, 2, 5 * D, 5 * D))
    amb = AmbientState(8.0, phi, 0.06)
    members = upstream_set(m, amb)
    sol = m.solve(amb, ControlState(np.where(np.isin(np.arange(4), members), yaw, 0.0), np.ones(4, bool)))
    assert np.all(sol.rotor_speed[members] >= 8.0 * (1 - 1e-3) - 1e-9)
