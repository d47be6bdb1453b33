import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsfarm.farm import FarmModel
from qsfarm.plant import (
    History,
    Plant,
    PlantConfig,
    availability_flags,
    averaged_window,
    scheduled_availability,
    yaw_step,
)
from qsfarm.turbine import AmbientState, ControlState, FarmLayout, MeasurementWindow
from qsfarm.wake import WakeParams

D = 178.3
AMB = AmbientState(9.4, 270.0, 0.06)


def row(n=3):
    return FarmLayout.from_arrays([i * 5 * D for i in range(n)], [0] * n)


def test_yaw_rate_arithmetic():
    assert yaw_step(np.array([0.0]), np.array([20.0]), 10.0, 0.5, 0.5).tolist() == [5.0]
    assert yaw_step(np.array([18.0]), np.array([20.0]), 10.0, 0.5, 0.5).tolist() == [20.0]
    assert yaw_step(np.array([19.6]), np.array([20.0]), 10.0, 0.5, 0.5).tolist() == [19.6]
    assert yaw_step(np.array([0.0]), np.array([-7.0]), 10.0, 0.5, 0.5).tolist() == [-5.0]


def test_target_equal_actual_holds(turbine):
    p = Plant(turbine, row(), AMB, PlantConfig(noise_std=0.0))
    power = p.step()
    assert p.state.yaw.tolist() == [0, 0, 0]
    truth = FarmModel(turbine, row()).solve(AMB, ControlState.greedy(3)).power
    assert np.array_equal(power, truth)


def test_noise_free_plant_matches_controller_model(turbine):
    kappa = WakeParams(0.3, 0.006, 2.0, 0.2)
    p = Plant(turbine, row(), AMB, PlantConfig(truth=kappa, noise_std=0.0))
    p.set_targets([20.0, -10.0, 0.0])
    p.run(10.0)
    model = FarmModel(turbine, row(), kappa)
    pred = model.solve(AMB, ControlState(p.state.yaw, np.ones(3, bool))).power
    assert p.state.yaw.tolist() == [20.0, -10.0, 0.0]
    assert np.allclose(p.history.power[-1], pred, rtol=1e-6, atol=0)


def test_off_turbines_emit_zero_and_leave_upstream_alone(turbine):
    cfg = PlantConfig(noise_std=0.0, schedule=((1, 0.0, 5.0),))
    p = Plant(turbine, row(), AMB, cfg)
    first = p.step()
    assert first[1] == 0.0
    on = Plant(turbine, row(), AMB, PlantConfig(noise_std=0.0)).step()
    assert first[0] == on[0]
    assert first[2] > on[2]
    p.run(5.0)
    assert p.history.power[-1][1] > 0


def test_schedule_lookup():
    sched = ((0, 10.0, 20.0), (2, 0.0, 1e9))
    assert scheduled_availability(sched, 3, 5.0).tolist() == [True, True, False]
    assert scheduled_availability(sched, 3, 10.0).tolist() == [False, True, False]
    assert scheduled_availability(sched, 3, 20.0).tolist() == [True, True, False]


def test_noise_statistics(turbine):
    lay = FarmLayout.from_arrays([0], [0])
    p = Plant(turbine, lay, AMB, PlantConfig(noise_std=0.03, noise_tau=30.0), seed=3)
    p.run(20_000.0)
    base = FarmModel(turbine, lay).solve(AMB, ControlState.greedy(1)).power[0]
    x = np.asarray(p.history.power)[:, 0] / base - 1
    assert np.std(x) == pytest.approx(0.03, rel=0.15)
    lag = int(30 / 0.5)
    rho = np.corrcoef(x[:-lag], x[lag:])[0, 1]
    assert rho == pytest.approx(np.exp(-1), abs=0.12)


def test_plant_deterministic(turbine):
    runs = []
    for _ in range(2):
        p = Plant(turbine, row(), AMB, seed=5)
        p.set_targets([10, 0, 0])
        p.run(60.0)
        runs.append(np.asarray(p.history.power))
    assert np.array_equal(*runs)


def test_averaged_window():
    h = History()
    for k in range(10):
        h.append(0.5 * (k + 1), np.array([5.0, 4.0 if k % 2 else 0.0, 3.0]), np.array([1.0, 0, 0]),
                 np.array([True, True, k >= 3]), np.zeros(3))
    w = averaged_window(h, 5.0, 0.5)
    assert w.power.tolist() == [5.0, 2.0, 3.0]
    assert w.completeness.tolist() == [1.0, 1.0, 0.7]
    with pytest.raises(ValueError):
        averaged_window(h, 6.0, 0.5)


def test_availability_flags():
    w = MeasurementWindow(600, np.ones(4), np.zeros(4), np.array([1.0, 0.85, 0.9, 0.0]))
    assert availability_flags(w, 0.10).tolist() == [True, False, True, False]
    with pytest.raises(ValueError):
        availability_flags(w, 1.0)


def test_config_validation():
    for bad in (dict(dt=0), dict(noise_std=-0.1), dict(spin_up=-1), dict(deadband=-1)):
        with pytest.raises(ValueError):
            PlantConfig(**bad)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3), st.floats(0.1, 2.0))
def test_rate_limit_respected(turbine, target, dt):
    p = Plant(turbine, row(), AMB, PlantConfig(dt=dt, noise_std=0.0))
    p.set_targets(target)
    p.run(8 * dt)
    yaw = np.vstack([np.zeros(3), np.asarray(p.history.yaw)])
    assert np.all(np.abs(np.diff(yaw, axis=0)) <= turbine.yaw_rate_limit * dt + 1e-12)
