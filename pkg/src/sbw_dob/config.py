"""Flat ``key = value`` scenario config format.

One assignment per line, ``#`` starts a comment, keys are dotted paths, units
are SI. Unknown keys are errors. Vector values are comma-separated. The full
key list with defaults is :data:`DEFAULTS`; ``sbw-dob`` writes it with
``dumps(ScenarioConfig())``.
"""
from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from . import control, dynamics, estimation, signals
from .errors import ConfigError, ParameterError
from .simulation import ScenarioConfig

DEFAULTS = {
    # general
    "sample_time": 0.001,
    "duration": 10.0,
    "model": "linear",
    "filter": "kf",
    "excitation": "sine",
    "rejection": False,
    "jacobian": "fd",
    "ekf_substeps": 4,
    "p0": 1e-3,
    "warmup": 1.0,
    "seed": 0,
    # driver torque (sine excitation)
    "driver.f_act": 0.8,
    "driver.A_act": 2.0,
    "driver.f_pas": 7.0,
    "driver.A_pas": 0.5,
    "driver.phi_act": 0.0,
    "driver.phi_pas": 0.0,
    # chirp excitation
    "chirp.f0": 0.5,
    "chirp.f1": 20.0,
    "chirp.duration": 60.0,
    "chirp.amplitude": 1.0,
    # filter covariances and truth noise
    "noise.Q_diag": (1e-7, 1e-7, 1e-7, 1e-7, 0.1),
    "noise.R_diag": (1e-6, 1e-6),
    "noise.meas_std": 1e-3,
    "noise.process_std": 0.0,
    # linear hand-wheel parameters (gear c_g, d_g double as c_g1, d_g1)
    "hw.J_sw": 0.04,
    "hw.J_m": 0.002,
    "hw.d_sw": 0.225,
    "hw.d_m": 0.0034,
    "hw.c_g": 76.9731,
    "hw.d_g": 1e-5,
    # nonlinear parameters
    "stribeck_sw.d_v": 0.0084,
    "stribeck_sw.d_s": 0.735,
    "stribeck_sw.d_k": 0.462,
    "stribeck_sw.omega_c": 0.85,
    "stribeck_sw.delta": 2.0,
    "stribeck_m.d_v": 0.0036,
    "stribeck_m.d_s": 0.315,
    "stribeck_m.d_k": 0.198,
    "stribeck_m.omega_c": 0.85,
    "stribeck_m.delta": 2.0,
    "gear.c_g2": 0.0,
    "gear.alpha": 1.0,
    "gear.d_g2": 0.0,
    "gear.beta": 1.0,
    "pt1.T": 0.08,
    "pt1.K": 1.0,
    # high-pass and controller
    "iir.F_cut": 4.0,
    "iir.order": 1,
    "control.c_ref": 2.0,
    "control.d_ref": 0.5,
    "control.k_rej": 1.0,
    # evaluation
    "metrics.normalization": "range",
    "welch.nperseg": 4096,
    "welch.overlap": 0.5,
}

# sidecar lines that are not config keys
_META_KEYS = ("config_hash", "rows")

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _parse_value(key, raw, line=None):
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() not in _BOOL:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            vals = tuple(float(v) for v in raw.split(","))
            if len(vals) != len(default):
                raise ValueError(f"expected {len(default)} comma-separated values")
            return vals
        return raw
    except ValueError as exc:
        raise ConfigError(str(exc), key=key, line=line) from None


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def loads(text):
    """Parse config text into a ``{key: value}`` dict (only keys present)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError("unknown key", key=key, line=lineno)
        values[key] = _parse_value(key, raw, lineno)
    return values


def parse_override(item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = (s.strip() for s in item.split("=", 1))
    if key not in DEFAULTS:
        raise ConfigError("unknown key", key=key)
    return key, _parse_value(key, raw)


def from_flat(values):
    """Build a :class:`ScenarioConfig` from a (partial) flat dict."""
    unknown = set(values) - set(DEFAULTS)
    if unknown:
        raise ConfigError("unknown key", key=sorted(unknown)[0])
    v = dict(DEFAULTS)
    v.update(values)

    def sub(prefix):
        return {k.split(".", 1)[1]: val for k, val in v.items() if k.startswith(prefix + ".")}

    try:
        lin = dynamics.HwLinearParams(**sub("hw"))
        g = sub("gear")
        hw = dynamics.HwParams(
            linear=lin,
            stribeck_sw=dynamics.StribeckParams(**sub("stribeck_sw")),
            stribeck_m=dynamics.StribeckParams(**sub("stribeck_m")),
            gear=dynamics.GearNonlinParams(c_g1=lin.c_g, d_g1=lin.d_g, **g),
            pt1=dynamics.Pt1Params(**sub("pt1")),
        )
        noise = estimation.NoiseConfig.from_diagonals(v["noise.Q_diag"], v["noise.R_diag"])
        ctrl = control.ImpedanceParams(rejection_enabled=v["rejection"], **sub("control"))
        return ScenarioConfig(
            T_s=v["sample_time"],
            duration=v["duration"],
            model=v["model"],
            filter=v["filter"],
            excitation=v["excitation"],
            driver=signals.DriverTorqueConfig(**sub("driver")),
            chirp=signals.ChirpConfig(**sub("chirp")),
            noise=noise,
            meas_std=v["noise.meas_std"],
            process_std=v["noise.process_std"],
            hw=hw,
            control=ctrl,
            iir_cutoff=v["iir.F_cut"],
            iir_order=v["iir.order"],
            p0=v["p0"],
            jacobian=v["jacobian"],
            ekf_substeps=v["ekf_substeps"],
            warmup=v["warmup"],
            normalization=v["metrics.normalization"],
            welch_nperseg=v["welch.nperseg"],
            welch_overlap=v["welch.overlap"],
            seed=v["seed"],
        )
    except ConfigError:
        raise
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def to_flat(cfg: ScenarioConfig):
    """Inverse of :func:`from_flat`; diagonal covariances only."""
    hw = cfg.hw
    out = {
        "sample_time": cfg.T_s,
        "duration": cfg.duration,
        "model": cfg.model,
        "filter": cfg.filter,
        "excitation": cfg.excitation,
        "rejection": cfg.control.rejection_enabled,
        "jacobian": cfg.jacobian,
        "ekf_substeps": cfg.ekf_substeps,
        "p0": cfg.p0,
        "warmup": cfg.warmup,
        "seed": cfg.seed,
        "noise.Q_diag": tuple(float(q) for q in np.diag(cfg.noise.Q)),
        "noise.R_diag": tuple(float(r) for r in np.diag(cfg.noise.R)),
        "noise.meas_std": cfg.meas_std,
        "noise.process_std": cfg.process_std,
        "iir.F_cut": cfg.iir_cutoff,
        "iir.order": cfg.iir_order,
        "metrics.normalization": cfg.normalization,
        "welch.nperseg": cfg.welch_nperseg,
        "welch.overlap": cfg.welch_overlap,
    }
    for prefix, obj in (("driver", cfg.driver), ("chirp", cfg.chirp), ("hw", hw.linear),
                        ("stribeck_sw", hw.stribeck_sw), ("stribeck_m", hw.stribeck_m),
                        ("gear", hw.gear), ("pt1", hw.pt1), ("control", cfg.control)):
        for f in dataclasses.fields(obj):
            key = f"{prefix}.{f.name}"
            if key in DEFAULTS:
                out[key] = getattr(obj, f.name)
    # keep DEFAULTS order and coerce to the schema type
    ordered = {}
    for key, default in DEFAULTS.items():
        val = out[key]
        if isinstance(default, bool):
            val = bool(val)
        elif isinstance(default, int):
            val = int(val)
        elif isinstance(default, float):
            val = float(val)
        ordered[key] = val
    return ordered


def dumps(cfg: ScenarioConfig, exclude=()):
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in to_flat(cfg).items() if k not in exclude)


def config_hash(cfg: ScenarioConfig):
    """SHA-256 of the canonical config text, excluding the seed."""
    return hashlib.sha256(dumps(cfg, exclude=("seed",)).encode()).hexdigest()


def load(path, overrides=()):
    """Read a config file, apply ``key=value`` overrides, return a :class:`ScenarioConfig`.

    A trace ``.meta`` sidecar is accepted too; its bookkeeping keys are skipped.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if str(path).endswith(".meta"):
        text = "\n".join(ln if ln.split("=", 1)[0].strip() not in _META_KEYS else ""
                         for ln in text.splitlines())
    values = loads(text)
    for item in overrides:
        k, val = parse_override(item)
        values[k] = val
    return from_flat(values)


def read_meta(path):
    """Read a trace ``.meta`` sidecar as a ``{key: raw string}`` dict."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            body = line.split("#", 1)[0].strip()
            if body and "=" in body:
                k, v = (s.strip() for s in body.split("=", 1))
                meta[k] = v
    return meta


def config_from_meta(meta):
    """Rebuild the echoed :class:`ScenarioConfig` from a sidecar dict."""
    vals = {k: _parse_value(k, v) for k, v in meta.items() if k in DEFAULTS}
    return from_flat(vals)
