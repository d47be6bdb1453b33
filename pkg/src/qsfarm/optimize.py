"""Combined power and fatigue yaw set-point optimisation.

Power and load terms are normalised per turbine by the zero-yaw operating
point with the same availability, so the greedy solution scores
P_GAIN = DEL_GAIN = number of available turbines. Thrust coefficients are
frozen at that operating point during a search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .farm import FarmModel, FarmSolution
from .lut import FatigueLut, lut_interpolate
from .turbine import AmbientState, ControlState

log = logging.getLogger(__name__)

YAW_BOUND = 30.0


@dataclass(frozen=True)
class ObjectiveWeights:
    w_p: float = 1.0
    w_l: float = 0.0

    def __post_init__(self):
        if self.w_p < 0 or self.w_l < 0 or abs(self.w_p + self.w_l - 1) > 1e-12:
            raise ValueError("weights must be non-negative and sum to one")

    @classmethod
    def parse(cls, text: str) -> "ObjectiveWeights":
        w_p, w_l = (float(v) for v in text.split(","))
        return cls(w_p, w_l)


@dataclass(frozen=True)
class OptimizationResult:
    yaw: np.ndarray
    objective: float
    p_gain: float
    del_gain: float
    starts: int
    converged: bool
    evaluations: int


def lut_inputs(solution: FarmSolution, yaw, lut: FatigueLut) -> np.ndarray:
    """Per-turbine table coordinates: background speed, rotor TI, yaw, zero pitch, dominant wake."""
    n = solution.rotor_speed.size
    waked = solution.dominant_source >= 0
    # unwaked rotors: width and centre are irrelevant at zero depth, any in-range value works
    width = np.where(waked, solution.wake_width, float(np.median(lut.axes[5])))
    return np.column_stack([
        np.full(n, solution.background_speed),
        solution.ti_rotor,
        np.asarray(yaw, dtype=float),
        np.zeros(n),
        np.where(waked, solution.wake_depth, 0.0),
        width,
        np.where(waked, solution.wake_offset, 0.0),
    ])


class YawProblem:
    """Objective evaluator for one model state and availability pattern."""

    def __init__(self, model: FarmModel, ambient: AmbientState, availability=None,
                 weights: ObjectiveWeights = ObjectiveWeights(), lut: FatigueLut | None = None,
                 channel: int = 0, freeze_ct: bool = True):
        n = model.n_turbines
        self.model = model
        self.ambient = ambient
        self.availability = np.ones(n, bool) if availability is None else np.asarray(availability, bool)
        self.weights = weights
        self.lut = lut
        self.channel = channel
        if weights.w_l > 0 and lut is None:
            raise ValueError("a load weight needs a fatigue table")
        self.baseline = model.solve(ambient, ControlState(np.zeros(n), self.availability))
        self.ct_fixed = self.baseline.ct.copy() if freeze_ct else None
        p0 = self.baseline.power
        self.power_mask = self.availability & (p0 > 0)
        if np.any(self.availability & ~self.power_mask):
            log.info("turbines %s produce no power at zero yaw; excluded from P_GAIN",
                        np.nonzero(self.availability & ~self.power_mask)[0].tolist())
        self.p0 = np.where(self.power_mask, p0, 1.0)
        self.del0 = None
        if lut is not None:
            d0 = self._dels(self.baseline, np.zeros(n))
            self.del_mask = self.availability & (d0 > 0)
            if np.any(self.availability & ~self.del_mask):
                log.warning("zero baseline DEL for turbines %s; ratio set to one",
                            np.nonzero(self.availability & ~self.del_mask)[0].tolist())
            self.del0 = np.where(self.del_mask, d0, 1.0)
        self.evaluations = 0

    def _dels(self, solution, yaw):
        vals, _ = lut_interpolate(self.lut, lut_inputs(solution, yaw, self.lut))
        return vals[:, self.channel]

    def solve(self, yaw) -> FarmSolution:
        ctrl = ControlState(np.asarray(yaw, dtype=float), self.availability)
        return self.model.solve(self.ambient, ctrl, self.ct_fixed)

    def power_gain(self, yaw, solution=None) -> float:
        sol = self.solve(yaw) if solution is None else solution
        return float(np.sum(np.where(self.power_mask, sol.power / self.p0, 0.0)))

    def del_gain(self, yaw, solution=None) -> float:
        if self.lut is None:
            raise ValueError("no fatigue table loaded")
        sol = self.solve(yaw) if solution is None else solution
        ratio = np.where(self.del_mask, self._dels(sol, yaw) / self.del0, 1.0)
        return float(np.sum(np.where(self.availability, ratio, 0.0)))

    def evaluate(self, yaw) -> tuple[float, float, float]:
        """Objective, P_GAIN and DEL_GAIN (NaN when the load term is off)."""
        self.evaluations += 1
        sol = self.solve(yaw)
        pg = self.power_gain(yaw, sol)
        dg = self.del_gain(yaw, sol) if self.weights.w_l > 0 else float("nan")
        obj = -self.weights.w_p * pg + (self.weights.w_l * dg if self.weights.w_l > 0 else 0.0)
        return obj, pg, dg

    def __call__(self, yaw) -> float:
        return self.evaluate(yaw)[0]


def power_gain(yaw, model: FarmModel, ambient: AmbientState, availability=None) -> float:
    return YawProblem(model, ambient, availability).power_gain(yaw)


def del_gain(yaw, model: FarmModel, ambient: AmbientState, lut: FatigueLut, availability=None) -> float:
    return YawProblem(model, ambient, availability, lut=lut).del_gain(yaw)


def objective(yaw, weights: ObjectiveWeights, model: FarmModel, ambient: AmbientState,
              lut: FatigueLut | None = None, availability=None) -> float:
    return YawProblem(model, ambient, availability, weights, lut)(yaw)


def pattern_search(fun, x0, free, bound: float = YAW_BOUND, step: float = 10.0, min_step: float = 0.1,
                   max_evals: int = 20_000):
    """Bounded compass search with step halving.

    Polls +/- step along each free coordinate and keeps the first improvement;
    a sweep without one halves the step. Stops when the step falls below
    ``min_step``, at which point the last sweep changed nothing.
    """
    x = np.clip(np.asarray(x0, dtype=float), -bound, bound)
    x[~free] = 0.0
    fx = fun(x)
    evals = 1
    while evals < max_evals:
        improved = False
        for i in np.nonzero(free)[0]:
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] = np.clip(x[i] + sgn * step, -bound, bound)
                if trial[i] == x[i]:
                    continue
                ft = fun(trial)
                evals += 1
                if ft < fx - 1e-12:
                    x, fx = trial, ft
                    improved = True
                    break
        if not improved:
            step *= 0.5
            if step < min_step:
                return x, fx, evals, True
    return x, fx, evals, False


def optimize_yaw(model: FarmModel, ambient: AmbientState, weights: ObjectiveWeights = ObjectiveWeights(),
                 lut: FatigueLut | None = None, availability=None, starts: int = 5, seed: int = 0,
                 bound: float = YAW_BOUND, min_step: float = 0.1, initial=None) -> OptimizationResult:
    """Multi-start pattern search from zero yaw plus ``starts`` random points.

    ``initial`` (e.g. the set points in force) is searched first, ahead of the
    zero start. Unavailable turbines are pinned at zero. Ties between starts go
    to the earliest start, so the result is deterministic for a given seed.
    """
    problem = YawProblem(model, ambient, availability, weights, lut)
    n = model.n_turbines
    free = problem.availability.copy()
    rng = np.random.default_rng(seed)
    x_starts = [np.zeros(n)] + [rng.uniform(-bound, bound, n) for _ in range(starts)]
    if initial is not None:
        x_starts.insert(0, np.where(free, np.asarray(initial, dtype=float), 0.0))
    best = None
    converged = True
    for x0 in x_starts:
        x, fx, _, ok = pattern_search(problem, x0, free, bound, min_step=min_step)
        converged &= ok
        if best is None or fx < best[1]:
            best = (x, fx)
    x, fx = best
    obj, pg, dg = problem.evaluate(x)
    return OptimizationResult(x, obj, pg, dg, len(x_starts), bool(converged), problem.evaluations)
