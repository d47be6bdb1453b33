"""Quasi-static closed-loop wake-steering control on an analytical wind-farm model."""

from .farm import FarmModel, FarmSolution, merge_wakes, turbine_power
from .turbine import (
    AmbientState,
    ControlState,
    FarmLayout,
    MeasurementWindow,
    TurbineSpec,
    downstream_order,
    load_layout,
    load_turbine,
    rotate_layout,
)
from .wake import WakeParams

__version__ = "0.1.0"
