"""Quasi-static virtual plant: truth-parameterised farm model with noisy power and rate-limited yaw."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .farm import FarmModel, FarmSolution
from .turbine import AmbientState, ControlState, FarmLayout, MeasurementWindow, TurbineSpec
from .wake import WakeParams

OFF_THRESHOLD = 0.10


@dataclass(frozen=True)
class PlantConfig:
    truth: WakeParams = WakeParams()
    eta: float | None = None  # truth power scaling; None keeps the turbine's value
    deficit_scale: float = 1.0
    noise_std: float = 0.03
    noise_tau: float = 30.0  # s
    dt: float = 0.5  # s
    spin_up: float = 900.0  # s
    yaw_rate: float | None = None  # deg/s; None takes the turbine's limit
    deadband: float = 0.5  # deg
    schedule: tuple = ()  # (turbine, t_off, t_on) with the turbine off for t_off <= t < t_on

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("plant time step must be positive")
        if self.noise_std < 0 or self.noise_tau <= 0:
            raise ValueError("invalid noise model")
        if self.spin_up < 0:
            raise ValueError("spin-up must be non-negative")
        if self.deadband < 0:
            raise ValueError("deadband must be non-negative")
        object.__setattr__(self, "schedule", tuple((int(k), float(a), float(b)) for k, a, b in self.schedule))


@dataclass(frozen=True)
class PlantState:
    clock: float
    yaw: np.ndarray
    target: np.ndarray
    noise: np.ndarray
    availability: np.ndarray


def yaw_step(actual, target, rate: float, dt: float, deadband: float) -> np.ndarray:
    """On-off actuator: slew at the full rate until within the deadband, then hold."""
    diff = target - actual
    move = np.where(np.abs(diff) > deadband, np.sign(diff) * np.minimum(np.abs(diff), rate * dt), 0.0)
    return actual + move


def scheduled_availability(schedule, n: int, t: float) -> np.ndarray:
    avail = np.ones(n, bool)
    for k, t_off, t_on in schedule:
        if t_off <= t < t_on:
            avail[k] = False
    return avail


@dataclass
class History:
    """Per-step plant log."""

    time: list = field(default_factory=list)
    power: list = field(default_factory=list)
    yaw: list = field(default_factory=list)
    availability: list = field(default_factory=list)
    target: list = field(default_factory=list)

    def append(self, t, power, yaw, avail, target):
        self.time.append(t)
        self.power.append(power)
        self.yaw.append(yaw)
        self.availability.append(avail)
        self.target.append(target)

    def arrays(self, start: int = 0):
        return (np.asarray(self.time[start:]), np.asarray(self.power[start:]), np.asarray(self.yaw[start:]),
                np.asarray(self.availability[start:]), np.asarray(self.target[start:]))

    def __len__(self):
        return len(self.time)


class Plant:
    """Steps the truth model; owns its random stream and log, deterministic for a given seed."""

    def __init__(self, turbine: TurbineSpec, layout: FarmLayout, ambient: AmbientState,
                 config: PlantConfig = PlantConfig(), seed: int = 0):
        self.config = config
        self.ambient = ambient
        self.model = FarmModel(turbine, layout, config.truth, True, config.deficit_scale, config.eta)
        self.rate = turbine.yaw_rate_limit if config.yaw_rate is None else config.yaw_rate
        self.rng = np.random.default_rng(seed)
        n = layout.n_turbines
        self.n = n
        self._decay = math.exp(-config.dt / config.noise_tau)
        self._cache_key = None
        self._cache = None
        self.state = PlantState(0.0, np.zeros(n), np.zeros(n), config.noise_std * self.rng.standard_normal(n),
                                scheduled_availability(config.schedule, n, 0.0))
        self.history = History()

    def truth(self, yaw, availability) -> FarmSolution:
        key = (np.asarray(yaw, float).tobytes(), np.asarray(availability, bool).tobytes())
        if key != self._cache_key:
            self._cache = self.model.solve(self.ambient, ControlState(yaw, availability))
            self._cache_key = key
        return self._cache

    def set_targets(self, target) -> None:
        target = np.clip(np.asarray(target, float), -90.0, 90.0)
        self.state = replace(self.state, target=target)

    def step(self) -> np.ndarray:
        """Advance one time step and return the instantaneous powers [W]."""
        cfg, s = self.config, self.state
        yaw = yaw_step(s.yaw, s.target, self.rate, cfg.dt, cfg.deadband)
        t = s.clock + cfg.dt
        avail = scheduled_availability(cfg.schedule, self.n, s.clock)
        noise = self._decay * s.noise + cfg.noise_std * math.sqrt(1 - self._decay**2) * self.rng.standard_normal(self.n)
        power = self.truth(yaw, avail).power * (1.0 + noise)
        power = np.where(avail, power, 0.0)
        self.state = PlantState(t, yaw, s.target, noise, avail)
        self.history.append(t, power, yaw, avail, s.target)
        return power

    def run(self, duration: float) -> None:
        for _ in range(int(round(duration / self.config.dt))):
            self.step()


def averaged_window(history: History, length: float, dt: float) -> MeasurementWindow:
    """Trailing-window means of power and yaw, and the fraction of steps each turbine was on."""
    n_steps = int(round(length / dt))
    if n_steps <= 0 or len(history) < n_steps:
        raise ValueError("not enough history for the requested window")
    _, power, yaw, avail, _ = history.arrays(len(history) - n_steps)
    return MeasurementWindow(length, power.mean(axis=0), yaw.mean(axis=0), avail.mean(axis=0))


def availability_flags(window: MeasurementWindow, threshold: float = OFF_THRESHOLD) -> np.ndarray:
    """B = 0 for turbines missing for more than ``threshold`` of the window."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    return window.completeness >= 1.0 - threshold - 1e-12
