"""Error metrics, delay estimation and nonparametric frequency-response identification."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import ParameterError

NORMALIZATIONS = ("range", "rms", "maxabs")


def _pair(true_sig, est_sig):
    a = np.asarray(true_sig, dtype=float)
    b = np.asarray(est_sig, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ParameterError("signals must be 1-D, of equal length >= 2")
    return a, b


def _scale(a, basis):
    if basis == "range":
        s = np.ptp(a)
    elif basis == "rms":
        s = np.sqrt(np.mean((a - a.mean()) ** 2))
    elif basis == "maxabs":
        s = np.max(np.abs(a))
    else:
        raise ParameterError(f"unknown normalization {basis!r}; expected one of {NORMALIZATIONS}")
    if s == 0:
        raise ParameterError("true signal is constant; normalization undefined")
    return s


def normalized_rmse(true_sig, est_sig, basis="range"):
    """RMSE of ``est - true`` as a percentage of the true signal's scale."""
    a, b = _pair(true_sig, est_sig)
    return 100.0 * np.sqrt(np.mean((b - a) ** 2)) / _scale(a, basis)


def normalized_mae(true_sig, est_sig, basis="range"):
    a, b = _pair(true_sig, est_sig)
    return 100.0 * np.mean(np.abs(b - a)) / _scale(a, basis)


def estimate_delay(ref_sig, est_sig, T_s, max_lag=100):
    """Lag (in seconds) of ``est_sig`` behind ``ref_sig`` maximizing normalized cross-correlation."""
    a, b = _pair(ref_sig, est_sig)
    a = a - a.mean()
    b = b - b.mean()
    if not np.any(a) or not np.any(b):
        raise ParameterError("cannot estimate delay of a zero signal")
    n = a.size
    max_lag = min(int(max_lag), n - 2)
    best, best_lag = -np.inf, 0
    for lag in range(max_lag + 1):
        x = a[: n - lag]
        y = b[lag:]
        den = np.sqrt(np.dot(x, x) * np.dot(y, y))
        r = np.dot(x, y) / den if den > 0 else -np.inf
        if r > best:
            best, best_lag = r, lag
    return best_lag * T_s


def tone_amplitude(x, f_hz, T_s):
    """Amplitude and phase (rad) of the ``f_hz`` sinusoid in ``x`` by least squares."""
    x = np.asarray(x, dtype=float)
    t = np.arange(x.size) * T_s
    w = 2 * np.pi * f_hz * t
    basis = np.column_stack([np.sin(w), np.cos(w), np.ones_like(t)])
    (s, c, _), *_ = np.linalg.lstsq(basis, x, rcond=None)
    return float(np.hypot(s, c)), float(np.arctan2(c, s))


@dataclass(frozen=True)
class WelchConfig:
    nperseg: int = 4096
    overlap: float = 0.5
    window: str = "hann"
    fs: float = 1000.0
    detrend: str | bool = "constant"

    def __post_init__(self):
        if self.nperseg < 8:
            raise ParameterError("segment length must be >= 8")
        if not 0 <= self.overlap < 1:
            raise ParameterError("overlap must lie in [0, 1)")
        if self.fs <= 0:
            raise ParameterError("sample rate must be > 0")

    def _kw(self, n):
        if n < self.nperseg:
            raise ParameterError(f"signal of {n} samples is shorter than one segment ({self.nperseg})")
        return dict(fs=self.fs, window=self.window, nperseg=self.nperseg,
                    noverlap=int(self.overlap * self.nperseg), detrend=self.detrend,
                    scaling="density", return_onesided=True)


def welch_psd(x, cfg: WelchConfig | None = None):
    """One-sided power spectral density. Returns ``(f, Pxx)``."""
    cfg = cfg or WelchConfig()
    x = np.asarray(x, dtype=float)
    return sps.welch(x, **cfg._kw(x.size))


def welch_csd(x, y, cfg: WelchConfig | None = None):
    """One-sided cross spectral density ``E[conj(X) Y]``. Returns ``(f, Pxy)``."""
    cfg = cfg or WelchConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ParameterError("signals must have equal length")
    return sps.csd(x, y, **cfg._kw(x.size))


@dataclass(frozen=True)
class BodePoint:
    frequency: float
    magnitude_db: float
    phase_deg: float
    coherence: float


def tf_estimate(inp, out, cfg: WelchConfig | None = None, anchor_rel=1e-3):
    """H1 transfer-function estimate ``Pxy / Pxx`` as a list of :class:`BodePoint`.

    Bins whose input PSD is below ``1e-15`` of its peak are dropped. Phase is
    unwrapped across the kept bins and shifted by whole turns so that the
    lowest well-excited bin (PSD above ``anchor_rel`` of peak) lies in
    ``(-180, 180]``.
    """
    cfg = cfg or WelchConfig()
    f, pxx = welch_psd(inp, cfg)
    _, pyy = welch_psd(out, cfg)
    _, pxy = welch_csd(inp, out, cfg)
    peak = pxx.max()
    if peak <= 0:
        raise ParameterError("input has no power")
    keep = pxx >= 1e-15 * peak
    f, pxx, pyy, pxy = f[keep], pxx[keep], pyy[keep], pxy[keep]
    H = pxy / pxx
    phase = np.degrees(np.unwrap(np.angle(H)))
    anchor = int(np.argmax(pxx >= anchor_rel * peak))
    turns = np.round(phase[anchor] / 360.0)
    phase -= 360.0 * turns
    with np.errstate(divide="ignore", invalid="ignore"):
        coh = np.abs(pxy) ** 2 / (pxx * pyy)
    coh = np.clip(np.nan_to_num(coh), 0.0, 1.0)
    mag = 20 * np.log10(np.maximum(np.abs(H), 1e-300))
    return [BodePoint(float(a), float(b), float(c), float(d))
            for a, b, c, d in zip(f, mag, phase, coh)]


def bode_arrays(points):
    """Columns ``(f, mag_db, phase_deg, coherence)`` of a Bode point list."""
    arr = np.array([[p.frequency, p.magnitude_db, p.phase_deg, p.coherence] for p in points])
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def interp_bode(points, f_hz):
    """Linearly interpolated ``(magnitude_db, phase_deg)`` at ``f_hz``."""
    f, mag, ph, _ = bode_arrays(points)
    return float(np.interp(f_hz, f, mag)), float(np.interp(f_hz, f, ph))


def usable_bandwidth(points, mag_drop_db=3.0, max_lag_deg=90.0, f_min=0.5, min_coherence=0.5):
    """Highest frequency up to which magnitude stays within ``mag_drop_db`` of 0 dB
    and the phase lag stays below ``max_lag_deg``.

    Bins with coherence below ``min_coherence`` (e.g. above the end of a chirp)
    count as unusable.
    """
    f, mag, ph, coh = bode_arrays(points)
    sel = f >= f_min
    f, mag, ph, coh = f[sel], mag[sel], ph[sel], coh[sel]
    bad = (np.abs(mag) > mag_drop_db) | (-ph > max_lag_deg) | (coh < min_coherence)
    if not bad.any():
        return float(f[-1])
    i = int(np.argmax(bad))
    return float(f[i - 1]) if i > 0 else float(f[0])


def band_power(x, f_lo, f_hi, cfg: WelchConfig | None = None):
    """Trapezoidal integral of the Welch PSD over ``[f_lo, f_hi]``."""
    cfg = cfg or WelchConfig()
    if not 0 <= f_lo < f_hi <= cfg.fs / 2:
        raise ParameterError(f"need 0 <= f_lo < f_hi <= Nyquist, got [{f_lo}, {f_hi}]")
    f, p = welch_psd(x, cfg)
    sel = (f >= f_lo) & (f <= f_hi)
    if sel.sum() < 2:
        return 0.0
    return float(np.trapezoid(p[sel], f[sel]))


def write_bode_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_hz", "magnitude_db", "phase_deg", "coherence"])
        for p in points:
            w.writerow([f"{p.frequency:.17g}", f"{p.magnitude_db:.17g}",
                        f"{p.phase_deg:.17g}", f"{p.coherence:.17g}"])
    return path


def _safe(fn, *args, **kw):
    try:
        return float(fn(*args, **kw))
    except (ParameterError, ValueError):
        return float("nan")


def scenario_metrics(trace, cfg):
    """Summary metrics of a simulated run, evaluated after the warm-up period.

    ``rmse_pct``/``mae_pct`` compare the torque estimate with the true driver
    torque; the ``*_passive_pct`` variants compare the high-passed estimate
    with the true passive torque.
    """
    m = trace.after(cfg.warmup)
    T_s = cfg.T_s
    n = int(m.sum())
    welch = WelchConfig(nperseg=min(cfg.welch_nperseg, max(n, 8)), overlap=cfg.welch_overlap,
                        fs=1.0 / T_s)
    tot, pas = trace["td_total"][m], trace["td_passive"][m]
    est, est_hp = trace["td_hat"][m], trace["td_hat_hp"][m]
    w_sw = trace["x2"][m]
    basis = cfg.normalization
    out = {
        "delay_s": _safe(estimate_delay, tot, est, T_s),
        "rmse_pct": _safe(normalized_rmse, tot, est, basis),
        "mae_pct": _safe(normalized_mae, tot, est, basis),
        "rmse_passive_pct": _safe(normalized_rmse, pas, est_hp, basis),
        "mae_passive_pct": _safe(normalized_mae, pas, est_hp, basis),
        "bp_omega_sw_hf": _safe(band_power, w_sw, cfg.iir_cutoff, 0.5 / T_s, welch),
        "bp_omega_sw_total": _safe(band_power, w_sw, 0.0, 0.5 / T_s, welch),
    }
    if cfg.excitation == "sine" and n > 2:
        f_act = cfg.driver.f_act
        out["amp_phi_sw_act"] = tone_amplitude(trace["x1"][m], f_act, T_s)[0]
        a_est = tone_amplitude(est, f_act, T_s)[0]
        a_hp = tone_amplitude(est_hp, f_act, T_s)[0]
        out["hp_power_share_act"] = (a_hp / a_est) ** 2 if a_est > 0 else float("nan")
    return out
