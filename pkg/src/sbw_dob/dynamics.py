"""Continuous-time models of the steer-by-wire hand-wheel module.

State ordering is ``[phi_sw, omega_sw, phi_m, omega_m]`` for the mechanical
model and ``[phi_sw, omega_sw, phi_m, omega_m, T_d]`` for the extended-state
(disturbance observer) model. Inputs are ``u = [T_d, T_m]``. All quantities
are referenced to the steering-wheel side (gear ratio 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def _require(cond, msg):
    if not cond:
        raise ParameterError(msg)


@dataclass(frozen=True)
class HwLinearParams:
    J_sw: float = 0.04
    J_m: float = 0.002
    d_sw: float = 0.225
    d_m: float = 0.0034
    c_g: float = 76.9731
    d_g: float = 1e-5

    def __post_init__(self):
        _require(self.J_sw > 0, f"J_sw must be > 0, got {self.J_sw}")
        _require(self.J_m > 0, f"J_m must be > 0, got {self.J_m}")
        for name in ("d_sw", "d_m", "c_g", "d_g"):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0")


@dataclass(frozen=True)
class StribeckParams:
    """Stribeck friction curve: viscous, static, kinetic, characteristic speed, shape."""

    d_v: float
    d_s: float
    d_k: float
    omega_c: float
    delta: float = 2.0

    def __post_init__(self):
        _require(self.d_s >= self.d_k >= 0, "need d_s >= d_k >= 0")
        _require(self.omega_c > 0, "omega_c must be > 0")
        _require(self.delta > 0, "delta must be > 0")
        _require(self.d_v >= 0, "d_v must be >= 0")


def _stribeck_sw():
    return StribeckParams(d_v=0.0084, d_s=0.735, d_k=0.4620, omega_c=0.85, delta=2.0)


def _stribeck_m():
    return StribeckParams(d_v=0.0036, d_s=0.3150, d_k=0.1980, omega_c=0.85, delta=2.0)


@dataclass(frozen=True)
class GearNonlinParams:
    # c_g2 = d_g2 = 0 by default: Stribeck friction is the only active nonlinearity.
    c_g1: float = 76.9731
    c_g2: float = 0.0
    alpha: float = 1.0
    d_g1: float = 1e-5
    d_g2: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        _require(self.alpha > 0 and self.beta > 0, "alpha and beta must be > 0")
        _require(self.c_g1 >= 0 and self.d_g1 >= 0, "c_g1 and d_g1 must be >= 0")


@dataclass(frozen=True)
class Pt1Params:
    T: float = 0.08
    K: float = 1.0

    def __post_init__(self):
        _require(self.T > 0, f"PT1 time constant must be > 0, got {self.T}")


@dataclass(frozen=True)
class HwParams:
    """Full parameter set of the hand-wheel module; defaults are the reference hand-wheel."""

    linear: HwLinearParams = field(default_factory=HwLinearParams)
    stribeck_sw: StribeckParams = field(default_factory=_stribeck_sw)
    stribeck_m: StribeckParams = field(default_factory=_stribeck_m)
    gear: GearNonlinParams = field(default_factory=GearNonlinParams)
    pt1: Pt1Params = field(default_factory=Pt1Params)

    @property
    def J_sw(self):
        return self.linear.J_sw

    @property
    def J_m(self):
        return self.linear.J_m


def sign(v):
    """Sign function with ``sign(0) == 0``."""
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


def linear_matrices(p: HwLinearParams):
    """Return ``(A, B, C)`` of the linear two-mass model."""
    J_sw, J_m = p.J_sw, p.J_m
    c, d = p.c_g, p.d_g
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-c / J_sw, (-d - p.d_sw) / J_sw, c / J_sw, d / J_sw],
        [0.0, 0.0, 0.0, 1.0],
        [c / J_m, d / J_m, -c / J_m, (-d - p.d_m) / J_m],
    ])
    B = np.array([
        [0.0, 0.0],
        [1.0 / J_sw, 0.0],
        [0.0, 0.0],
        [0.0, 1.0 / J_m],
    ])
    C = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return A, B, C


def augmented_linear_matrices(p: HwParams):
    """Return ``(A5, B5, C5)`` with the driver torque appended as a PT1 state.

    The driver-torque input no longer acts on the steering wheel directly; it
    drives the PT1 state, which in turn acts on ``omega_sw``.
    """
    A, B, _ = linear_matrices(p.linear)
    T, K = p.pt1.T, p.pt1.K
    A5 = np.zeros((5, 5))
    A5[:4, :4] = A
    A5[1, 4] = 1.0 / p.linear.J_sw
    A5[4, 4] = -1.0 / T
    B5 = np.zeros((5, 2))
    B5[:4, 1] = B[:, 1]
    B5[4, 0] = K / T
    C5 = np.zeros((2, 5))
    C5[0, 2] = 1.0
    C5[1, 3] = 1.0
    return A5, B5, C5


def _decay(r, delta):
    # exp(-r**delta), which underflows to 0 rather than raising for huge r
    try:
        return math.exp(-r ** delta)
    except OverflowError:
        return 0.0


def _stribeck_scalar(sp: StribeckParams, w: float) -> float:
    if w == 0.0:
        return 0.0
    mag = sp.d_k + (sp.d_s - sp.d_k) * _decay(abs(w / sp.omega_c), sp.delta)
    return math.copysign(mag, w) + sp.d_v * w


def stribeck_torque(p: StribeckParams, omega):
    """Stribeck friction torque at angular velocity ``omega`` (scalar or array)."""
    if np.ndim(omega) == 0:
        return _stribeck_scalar(p, float(omega))
    w = np.asarray(omega, dtype=float)
    mag = p.d_k + (p.d_s - p.d_k) * np.exp(-np.abs(w / p.omega_c) ** p.delta)
    return np.sign(w) * mag + p.d_v * w


def stribeck_slope(p: StribeckParams, omega: float) -> float:
    """d(friction)/d(omega), taking d(sign)/d(omega) := 0."""
    w = float(omega)
    if w == 0.0:
        return p.d_v
    r = abs(w / p.omega_c)
    decay = _decay(r, p.delta)
    if decay == 0.0:
        return p.d_v
    dexp = -p.delta * r ** (p.delta - 1.0) / p.omega_c * decay
    return (p.d_s - p.d_k) * dexp + p.d_v


def _power_term(k1, k2, expo, delta_):
    return k1 * delta_ + k2 * abs(delta_) ** expo * sign(delta_)


def _power_slope(k1, k2, expo, delta_):
    if delta_ == 0.0:
        return k1 + (k2 if expo == 1 else 0.0)
    return k1 + k2 * expo * abs(delta_) ** (expo - 1.0)


def gear_torques(p: GearNonlinParams, x):
    """Return ``(spring_torque, damping_torque)`` transmitted by the gear."""
    dphi = float(x[2]) - float(x[0])
    dw = float(x[3]) - float(x[1])
    return (_power_term(p.c_g1, p.c_g2, p.alpha, dphi),
            _power_term(p.d_g1, p.d_g2, p.beta, dw))


def _mech_rates(p: HwParams, x1, x2, x3, x4, t_sw, t_m):
    g = p.gear
    tc = _power_term(g.c_g1, g.c_g2, g.alpha, x3 - x1)
    td = _power_term(g.d_g1, g.d_g2, g.beta, x4 - x2)
    f_sw = _stribeck_scalar(p.stribeck_sw, x2)
    f_m = _stribeck_scalar(p.stribeck_m, x4)
    return (x2,
            (tc + td - f_sw + t_sw) / p.linear.J_sw,
            x4,
            (-tc - td - f_m + t_m) / p.linear.J_m)


def nonlinear_dynamics(p: HwParams, x, u):
    """State derivative of the nonlinear model (Stribeck friction, nonlinear gear)."""
    x1, x2, x3, x4 = (float(v) for v in x[:4])
    return np.array(_mech_rates(p, x1, x2, x3, x4, float(u[0]), float(u[1])))


def augmented_nonlinear_dynamics(p: HwParams, x, u):
    """Nonlinear model with the driver torque as fifth (PT1) state.

    ``x[4]`` replaces ``u[0]`` on the steering wheel; ``u[0]`` feeds the PT1.
    """
    x1, x2, x3, x4, x5 = (float(v) for v in x[:5])
    r = _mech_rates(p, x1, x2, x3, x4, x5, float(u[1]))
    T, K = p.pt1.T, p.pt1.K
    return np.array(r + (-x5 / T + K / T * float(u[0]),))


def augmented_nonlinear_jacobian(p: HwParams, x, u=None):
    """Analytic Jacobian of :func:`augmented_nonlinear_dynamics` w.r.t. the state.

    The sign function is treated as piecewise constant, so the result is only
    meaningful away from zero velocity / zero gear deflection.
    """
    x1, x2, x3, x4 = (float(v) for v in x[:4])
    g = p.gear
    kc = _power_slope(g.c_g1, g.c_g2, g.alpha, x3 - x1)
    kd = _power_slope(g.d_g1, g.d_g2, g.beta, x4 - x2)
    fs = stribeck_slope(p.stribeck_sw, x2)
    fm = stribeck_slope(p.stribeck_m, x4)
    J_sw, J_m = p.linear.J_sw, p.linear.J_m
    return np.array([
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [-kc / J_sw, (-kd - fs) / J_sw, kc / J_sw, kd / J_sw, 1.0 / J_sw],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [kc / J_m, kd / J_m, -kc / J_m, (-kd - fm) / J_m, 0.0],
        [0.0, 0.0, 0.0, 0.0, -1.0 / p.pt1.T],
    ])


def measure(x):
    """Measured outputs: motor angle and motor angular velocity."""
    return np.array([float(x[2]), float(x[3])])


def linearized_params(p: HwParams) -> HwParams:
    """Nonlinear parameter set that degenerates exactly to the linear model.

    Stribeck terms become pure viscous damping with ``d_sw``/``d_m`` and the
    gear is linear with ``c_g``/``d_g``.
    """
    lin = p.linear
    return HwParams(
        linear=lin,
        stribeck_sw=StribeckParams(d_v=lin.d_sw, d_s=0.0, d_k=0.0, omega_c=1.0, delta=2.0),
        stribeck_m=StribeckParams(d_v=lin.d_m, d_s=0.0, d_k=0.0, omega_c=1.0, delta=2.0),
        gear=GearNonlinParams(c_g1=lin.c_g, c_g2=0.0, alpha=1.0, d_g1=lin.d_g, d_g2=0.0, beta=1.0),
        pt1=p.pt1,
    )
