"""Excitation signals, noise and the streaming high-pass filter."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# intentional steering happens below this frequency
INTENT_BAND_HZ = 2.0


@dataclass(frozen=True)
class DriverTorqueConfig:
    f_act: float = 0.8
    A_act: float = 2.0
    f_pas: float = 7.0
    A_pas: float = 0.5
    phi_act: float = 0.0
    phi_pas: float = 0.0

    def __post_init__(self):
        if min(self.f_act, self.f_pas) < 0 or min(self.A_act, self.A_pas) < 0:
            raise ParameterError("driver-torque frequencies and amplitudes must be >= 0")
        if self.f_act >= INTENT_BAND_HZ:
            warnings.warn(f"active torque frequency {self.f_act} Hz is outside the "
                          f"intentional-steering band (< {INTENT_BAND_HZ} Hz)", stacklevel=3)


def driver_torque(cfg: DriverTorqueConfig, t):
    """Return ``(active, passive, total)`` driver torque at time(s) ``t``."""
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    act = cfg.A_act * np.sin(2 * np.pi * cfg.f_act * t + cfg.phi_act)
    pas = cfg.A_pas * np.sin(2 * np.pi * cfg.f_pas * t + cfg.phi_pas)
    return act, pas, act + pas


@dataclass(frozen=True)
class ChirpConfig:
    """Linear frequency sweep from ``f0`` to ``f1`` over ``duration`` seconds."""

    f0: float = 0.5
    f1: float = 20.0
    duration: float = 60.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0 <= self.f0 <= self.f1:
            raise ParameterError(f"need 0 <= f0 <= f1, got f0={self.f0}, f1={self.f1}")
        if self.duration <= 0:
            raise ParameterError("chirp duration must be > 0")

    def check_nyquist(self, T_s):
        if self.f1 >= 0.5 / T_s:
            raise ParameterError(f"chirp end frequency {self.f1} Hz is not below Nyquist {0.5 / T_s} Hz")


def chirp_phase(cfg: ChirpConfig, t):
    """Phase in cycles; its time derivative is the instantaneous frequency."""
    return cfg.f0 * t + (cfg.f1 - cfg.f0) * t * t / (2.0 * cfg.duration)


def chirp_frequency(cfg: ChirpConfig, t):
    return cfg.f0 + (cfg.f1 - cfg.f0) * t / cfg.duration


def chirp(cfg: ChirpConfig, t):
    """Chirp excitation; zero outside ``[0, duration]``."""
    t_arr = np.asarray(t, dtype=float)
    out = cfg.amplitude * np.sin(2 * np.pi * chirp_phase(cfg, t_arr))
    out = np.where((t_arr >= 0) & (t_arr <= cfg.duration), out, 0.0)
    return float(out) if np.ndim(t) == 0 else out


@dataclass(eq=False)
class IirHighPass:
    """Cascade of first-order high-pass sections ``(b0, b1, a1)``.

    Each section realizes ``y[k] = b0 x[k] + b1 x[k-1] - a1 y[k-1]``.
    """

    cutoff: float
    order: int
    T_s: float
    sections: list
    state: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.state is None:
            self.state = np.zeros((len(self.sections), 2))

    @property
    def numerator(self):
        b = np.array([1.0])
        for b0, b1, _ in self.sections:
            b = np.convolve(b, [b0, b1])
        return b

    @property
    def denominator(self):
        a = np.array([1.0])
        for _, _, a1 in self.sections:
            a = np.convolve(a, [1.0, a1])
        return a

    def reset(self):
        self.state[:] = 0.0

    def frequency_response(self, f_hz):
        z = np.exp(1j * 2 * np.pi * np.asarray(f_hz, dtype=float) * self.T_s)
        zi = 1.0 / z
        return np.polyval(self.numerator[::-1], zi) / np.polyval(self.denominator[::-1], zi)

    def apply(self, sample):
        return filter_apply(self, sample)

    def filter(self, seq):
        return np.array([filter_apply(self, s) for s in seq])


def design_highpass(F_cut, T_s, n=1):
    """Prewarped bilinear-transform high-pass; each section is ``s / (s + w_c)``."""
    if T_s <= 0:
        raise ParameterError("sample time must be > 0")
    if not 0 < F_cut < 0.5 / T_s:
        raise ParameterError(f"cutoff {F_cut} Hz must lie in (0, {0.5 / T_s}) Hz")
    if int(n) != n or n < 1:
        raise ParameterError(f"order must be a positive integer, got {n}")
    k = math.tan(math.pi * F_cut * T_s)
    b0 = 1.0 / (1.0 + k)
    sect = (b0, -b0, (k - 1.0) / (k + 1.0))
    return IirHighPass(cutoff=F_cut, order=int(n), T_s=T_s, sections=[sect] * int(n))


def filter_apply(f: IirHighPass, sample):
    """Push one sample through the filter and return the output."""
    y = float(sample)
    st = f.state
    for i, (b0, b1, a1) in enumerate(f.sections):
        x_prev, y_prev = st[i]
        out = b0 * y + b1 * x_prev - a1 * y_prev
        st[i, 0] = y
        st[i, 1] = out
        y = out
    return y


def gaussian_noise(seed, std, count):
    """Reproducible zero-mean normal samples."""
    if std < 0:
        raise ParameterError("std must be >= 0")
    if std == 0:
        return np.zeros(int(count))
    return np.random.default_rng(seed).normal(0.0, std, int(count))
