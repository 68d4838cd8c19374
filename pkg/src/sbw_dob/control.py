"""Hand-wheel motor control: virtual impedance plus driver-torque rejection.

A static virtual spring/damper on the measured motor states emulates
steering feel. When rejection is enabled the high-passed driver-torque
estimate is subtracted, so the motor counteracts the passive driver torque.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ParameterError


@dataclass(frozen=True)
class ImpedanceParams:
    c_ref: float = 2.0
    d_ref: float = 0.5
    k_rej: float = 1.0
    rejection_enabled: bool = False

    def __post_init__(self):
        if self.c_ref < 0 or self.d_ref < 0 or self.k_rej < 0:
            raise ParameterError("c_ref, d_ref and k_rej must be >= 0")


def motor_torque(p: ImpedanceParams, z, t_d_hp=0.0):
    """Motor torque command from measured ``(phi_m, omega_m)`` and the high-passed estimate."""
    tm = -p.c_ref * float(z[0]) - p.d_ref * float(z[1])
    if p.rejection_enabled:
        tm -= p.k_rej * float(t_d_hp)
    return tm
