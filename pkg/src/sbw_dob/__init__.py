"""Kalman-filter disturbance observer for a steer-by-wire hand-wheel module."""

from .dynamics import HwParams, HwLinearParams, StribeckParams, GearNonlinParams, Pt1Params
from .estimation import NoiseConfig, FilterBelief, KalmanDOB, ExtendedKalmanDOB
from .simulation import ScenarioConfig, SimTrace, run_scenario, run_bode, persist_trace, load_trace

__all__ = [
    "HwParams", "HwLinearParams", "StribeckParams", "GearNonlinParams", "Pt1Params",
    "NoiseConfig", "FilterBelief", "KalmanDOB", "ExtendedKalmanDOB",
    "ScenarioConfig", "SimTrace", "run_scenario", "run_bode", "persist_trace", "load_trace",
]
