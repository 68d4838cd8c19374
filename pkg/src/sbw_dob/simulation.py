"""Fixed-step closed-loop simulation of plant, observer, high-pass and controller.

Per step ``k`` (time ``t_k = k * T_s``):

1. the driver torque at ``t_k`` is synthesized;
2. the truth state is advanced from ``t_{k-1}`` to ``t_k`` with the driver
   torque and motor torque of step ``k-1`` held constant (skipped at ``k=0``);
3. motor angle and velocity are measured with additive Gaussian noise;
4. the observer predicts with ``u = (T_d_hat[k-1], T_m[k-1])`` and corrects
   (correction only at ``k=0``);
5. the torque estimate is high-passed;
6. the motor torque for the next interval is computed.

The truth model never contains the PT1 element; the driver torque enters the
steering wheel directly.
"""
from __future__ import annotations

import csv
import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from . import control, dynamics, estimation, signals
from .errors import ConfigError, DivergenceError
from .numerics import rk4_step

COLUMNS = (
    "t",
    "x1", "x2", "x3", "x4",
    "z1", "z2",
    "xh1", "xh2", "xh3", "xh4", "xh5",
    "td_active", "td_passive", "td_total",
    "td_hat", "td_hat_hp",
    "t_m",
    "innov1", "innov2",
)

MODELS = ("linear", "nonlinear")
FILTERS = ("kf", "ekf", "none")
EXCITATIONS = ("sine", "chirp")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    T_s: float = 0.001
    duration: float = 10.0
    model: str = "linear"
    filter: str = "kf"
    excitation: str = "sine"
    driver: signals.DriverTorqueConfig = field(default_factory=signals.DriverTorqueConfig)
    chirp: signals.ChirpConfig = field(default_factory=signals.ChirpConfig)
    noise: estimation.NoiseConfig = field(default_factory=estimation.NoiseConfig)
    meas_std: float = 1e-3
    process_std: float = 0.0
    hw: dynamics.HwParams = field(default_factory=dynamics.HwParams)
    control: control.ImpedanceParams = field(default_factory=control.ImpedanceParams)
    iir_cutoff: float = 4.0
    iir_order: int = 1
    p0: float = 1e-3
    jacobian: str = "fd"
    ekf_substeps: int = estimation.EKF_SUBSTEPS
    warmup: float = 1.0
    normalization: str = "range"
    welch_nperseg: int = 4096
    welch_overlap: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.T_s <= 0:
            raise ConfigError("must be > 0", key="sample_time")
        if self.duration < self.T_s:
            raise ConfigError("must be >= sample_time", key="duration")
        for key, val, allowed in (("model", self.model, MODELS), ("filter", self.filter, FILTERS),
                                  ("excitation", self.excitation, EXCITATIONS),
                                  ("jacobian", self.jacobian, ("fd", "analytic"))):
            if val not in allowed:
                raise ConfigError(f"expected one of {allowed}, got {val!r}", key=key)
        if self.excitation == "chirp":
            try:
                self.chirp.check_nyquist(self.T_s)
            except ValueError as exc:
                raise ConfigError(str(exc), key="chirp.f1") from None
        if self.meas_std < 0 or self.process_std < 0:
            raise ConfigError("noise standard deviations must be >= 0", key="noise.meas_std")
        if self.normalization not in ("range", "rms", "maxabs"):
            raise ConfigError("expected one of range, rms, maxabs", key="metrics.normalization")
        if self.ekf_substeps < 1:
            raise ConfigError("must be >= 1", key="ekf_substeps")
        if self.warmup < 0:
            raise ConfigError("must be >= 0", key="warmup")

    @property
    def rejection(self):
        return self.control.rejection_enabled

    @property
    def n_steps(self):
        # one row per grid point, including t = 0 and t = duration
        return int(np.floor(self.duration / self.T_s + 1e-9)) + 1

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_rejection(self, enabled):
        return self.replace(control=dataclasses.replace(self.control, rejection_enabled=bool(enabled)))


@dataclass(eq=False)
class SimTrace:
    data: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.data[key]

    def __len__(self):
        return len(self.data["t"])

    @property
    def T_s(self):
        t = self.data["t"]
        return float(t[1] - t[0]) if len(t) > 1 else float(self.meta.get("sample_time", 0.0))

    def after(self, t0):
        """Index mask selecting samples with ``t >= t0``."""
        return self.data["t"] >= t0 - 1e-12

    def as_matrix(self):
        return np.column_stack([self.data[c] for c in COLUMNS])


def _make_filter(cfg: ScenarioConfig):
    belief = estimation.initial_belief(5, cfg.p0)
    if cfg.filter == "kf":
        return estimation.KalmanDOB(cfg.hw, cfg.T_s, cfg.noise, belief)
    if cfg.filter == "ekf":
        return estimation.ExtendedKalmanDOB(cfg.hw, cfg.T_s, cfg.noise, belief, jacobian=cfg.jacobian,
                                              substeps=cfg.ekf_substeps)
    return None


def _make_truth(cfg: ScenarioConfig):
    if cfg.model == "linear":
        A, B, _ = dynamics.linear_matrices(cfg.hw.linear)
        m = estimation.discretize(A, B, cfg.T_s, C=np.eye(4))
        A_d, B_d = m.A_d, m.B_d

        def advance(x, u):
            return A_d @ x + B_d @ u
    else:
        hw = cfg.hw

        def f(x, u):
            return dynamics.nonlinear_dynamics(hw, x, u)

        def advance(x, u):
            return rk4_step(f, x, u, cfg.T_s)
    return advance


def driver_torque_series(cfg: ScenarioConfig, t):
    """``(active, passive, total)`` arrays on the time grid ``t``."""
    if cfg.excitation == "chirp":
        c = signals.chirp(cfg.chirp, t)
        return np.zeros_like(t), c, c
    return signals.driver_torque(cfg.driver, t)


def run_scenario(cfg: ScenarioConfig, x0=None):
    """Simulate one closed-loop run and return its :class:`SimTrace`.

    Raises :class:`DivergenceError` (with the partial trace attached) when any
    truth or estimated state becomes non-finite.
    """
    N = cfg.n_steps
    T_s = cfg.T_s
    t = np.arange(N) * T_s
    act, pas, tot = driver_torque_series(cfg, t)
    meas_noise = signals.gaussian_noise(cfg.seed, cfg.meas_std, 2 * N).reshape(N, 2)
    proc_noise = signals.gaussian_noise((cfg.seed, 1), cfg.process_std, 4 * N).reshape(N, 4)

    advance = _make_truth(cfg)
    dob = _make_filter(cfg)
    hp = signals.design_highpass(cfg.iir_cutoff, T_s, cfg.iir_order)
    ctrl = cfg.control

    out = {c: np.zeros(N) for c in COLUMNS}
    out["t"] = t
    out["td_active"] = np.asarray(act, dtype=float)
    out["td_passive"] = np.asarray(pas, dtype=float)
    out["td_total"] = np.asarray(tot, dtype=float)
    X = np.zeros((N, 4))
    Z = np.zeros((N, 2))
    XH = np.zeros((N, 5))
    INN = np.zeros((N, 2))
    td_hat = out["td_hat"]
    td_hp = out["td_hat_hp"]
    t_m = out["t_m"]

    x = np.zeros(4) if x0 is None else np.asarray(x0, dtype=float).copy()
    tm_prev = 0.0
    for k in range(N):
        if k > 0:
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    x = advance(x, np.array([tot[k - 1], tm_prev]))
            except OverflowError:
                x = np.full(4, np.inf)
            if cfg.process_std > 0:
                x = x + proc_noise[k]
        z = np.array([x[2], x[3]]) + meas_noise[k]
        if dob is not None:
            if k == 0:
                innov, _ = dob.correct(z)
            else:
                innov, _ = dob.step(np.array([td_hat[k - 1], tm_prev]), z)
            xh = dob.belief.x_hat
        else:
            innov, xh = z, np.zeros(5)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xh))):
            partial = SimTrace({c: v[:k] for c, v in _assemble(out, X, Z, XH, INN).items()},
                               _meta(cfg))
            raise DivergenceError(f"non-finite state at step {k} (t = {t[k]:.6g} s)",
                                  step=k, partial=partial)
        X[k] = x
        Z[k] = z
        XH[k] = xh
        INN[k] = innov
        td_hat[k] = xh[4]
        td_hp[k] = signals.filter_apply(hp, xh[4])
        t_m[k] = tm_prev = control.motor_torque(ctrl, z, td_hp[k])
    return SimTrace(_assemble(out, X, Z, XH, INN), _meta(cfg))


def _assemble(out, X, Z, XH, INN):
    for i in range(4):
        out[f"x{i + 1}"] = X[:, i]
    for i in range(2):
        out[f"z{i + 1}"] = Z[:, i]
        out[f"innov{i + 1}"] = INN[:, i]
    for i in range(5):
        out[f"xh{i + 1}"] = XH[:, i]
    return out


def _meta(cfg):
    from . import config as cfgmod
    return {"config_hash": cfgmod.config_hash(cfg), "seed": cfg.seed}


def run_bode(cfg: ScenarioConfig, welch=None, self_test=False):
    """Chirp-driven run followed by ``tf_estimate(T_d, T_d_hat)``.

    The chirp replaces the sine driver torque and the run lasts one full
    sweep. With ``self_test`` the estimate is replaced by the input itself.
    Returns ``(bode_points, trace)``.
    """
    from . import analysis
    run_cfg = cfg.replace(excitation="chirp", duration=cfg.chirp.duration)
    trace = run_scenario(run_cfg)
    welch = welch or analysis.WelchConfig(fs=1.0 / cfg.T_s)
    x = trace["td_total"]
    y = x if self_test else trace["td_hat"]
    return analysis.tf_estimate(x, y, welch), trace


def persist_trace(trace: SimTrace, path, cfg: ScenarioConfig | None = None):
    """Write ``trace`` as CSV plus a ``.meta`` key-value sidecar.

    Returns ``(csv_path, meta_path)``. Numbers are written with 17 significant
    digits so a re-read reproduces every value exactly.
    """
    from . import config as cfgmod
    path = os.fspath(path)
    meta_path = os.path.splitext(path)[0] + ".meta"
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            mat = trace.as_matrix()
            for row in mat:
                w.writerow([f"{v:.17g}" for v in row])
        lines = [f"config_hash = {trace.meta.get('config_hash', '')}",
                 f"seed = {trace.meta.get('seed', '')}",
                 f"rows = {len(trace)}"]
        if cfg is not None:
            lines.append("")
            lines.append(cfgmod.dumps(cfg).rstrip("\n"))
        with open(meta_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"could not write trace to {path}: {exc}") from exc
    return path, meta_path


def load_trace(path):
    """Read a trace CSV written by :func:`persist_trace` (sidecar optional)."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    mat = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    data = {c: mat[:, i].copy() for i, c in enumerate(header)}
    meta = {}
    meta_path = os.path.splitext(path)[0] + ".meta"
    if os.path.exists(meta_path):
        from . import config as cfgmod
        meta = cfgmod.read_meta(meta_path)
    return SimTrace(data, meta)
