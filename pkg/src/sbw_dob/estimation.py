"""Kalman filter and extended Kalman filter disturbance observers.

Both filters run on the extended-state model in which the driver torque is a
PT1 state. The linear filter uses a fixed exactly-discretized model; the
extended filter integrates the nonlinear dynamics with RK4 and propagates the
covariance through ``expm(J * dt)`` of the local Jacobian ``J``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .errors import ConvergenceError, DimensionError, FilterDegenerateError, ParameterError
from .numerics import expm, jacobian_fd, rk4_step

# RK4 substeps per sample for EKF state propagation
EKF_SUBSTEPS = 4

MEAS_MATRIX = np.array([
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
])


def _default_q():
    return 1e-7 * np.diag([1.0, 1.0, 1.0, 1.0, 1e6])


def _default_r():
    return 1e-6 * np.eye(2)


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    """Process (Q) and measurement (R) noise covariances of the filter."""

    Q: np.ndarray = field(default_factory=_default_q)
    R: np.ndarray = field(default_factory=_default_r)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.trace(Q)):
            raise ParameterError("Q must be symmetric positive semidefinite")
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ParameterError("R must be symmetric positive definite")

    @classmethod
    def from_diagonals(cls, q_diag, r_diag):
        return cls(Q=np.diag(np.asarray(q_diag, dtype=float)),
                   R=np.diag(np.asarray(r_diag, dtype=float)))


@dataclass(eq=False)
class FilterBelief:
    x_hat: np.ndarray
    P: np.ndarray

    def copy(self):
        return FilterBelief(self.x_hat.copy(), self.P.copy())

    def is_psd(self, rel_tol=1e-10):
        if not np.allclose(self.P, self.P.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(self.P).max())):
            return False
        return np.linalg.eigvalsh(self.P).min() >= -rel_tol * np.trace(self.P)


def initial_belief(n=5, p0=1e-3):
    """Zero estimate with ``P0 = p0 * I``."""
    return FilterBelief(np.zeros(n), p0 * np.eye(n))


@dataclass(frozen=True, eq=False)
class KfModel:
    A_d: np.ndarray
    B_d: np.ndarray
    C: np.ndarray
    dt: float = 0.0

    def __post_init__(self):
        n = self.A_d.shape[0]
        if self.A_d.shape != (n, n) or self.B_d.shape[0] != n or self.C.shape[1] != n:
            raise DimensionError(
                f"inconsistent shapes A_d{self.A_d.shape}, B_d{self.B_d.shape}, C{self.C.shape}")


@dataclass(frozen=True, eq=False)
class SteadyState:
    K_inf: np.ndarray
    P_inf: np.ndarray
    iterations: int


def discretize(A, B, dt, C=None):
    """Zero-order-hold discretization via the block exponential ``expm([[A, B], [0, 0]] dt)``."""
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n, m = B.shape
    if A.shape != (n, n):
        raise DimensionError(f"A{A.shape} does not match B{B.shape}")
    blk = np.zeros((n + m, n + m))
    blk[:n, :n] = A
    blk[:n, n:] = B
    E = expm(blk * dt)
    if C is None:
        C = MEAS_MATRIX if n == 5 else np.eye(n)
    return KfModel(A_d=E[:n, :n], B_d=E[:n, n:], C=np.atleast_2d(np.asarray(C, dtype=float)), dt=dt)


def augmented_kf_model(p: dynamics.HwParams, dt):
    A5, B5, C5 = dynamics.augmented_linear_matrices(p)
    return discretize(A5, B5, dt, C5)


def _sym(P):
    return 0.5 * (P + P.T)


def kf_predict(model: KfModel, belief: FilterBelief, u, noise: NoiseConfig):
    x = model.A_d @ belief.x_hat + model.B_d @ np.asarray(u, dtype=float)
    P = model.A_d @ belief.P @ model.A_d.T + noise.Q
    return FilterBelief(x, _sym(P))


def _correct(C, belief, z, R):
    x_pri, P_pri = belief.x_hat, belief.P
    innov = np.asarray(z, dtype=float) - C @ x_pri
    S = C @ P_pri @ C.T + R
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e14:
        raise FilterDegenerateError("innovation covariance is numerically singular")
    # K = P C^T S^-1, solved rather than inverted
    K = np.linalg.solve(S, C @ P_pri).T
    x = x_pri + K @ innov
    P = (np.eye(x.size) - K @ C) @ P_pri
    return FilterBelief(x, _sym(P)), innov, K


def kf_correct(model: KfModel, belief: FilterBelief, z, noise: NoiseConfig):
    """Measurement update. Returns ``(posterior, innovation, gain)``."""
    return _correct(model.C, belief, z, noise.R)


def ekf_predict(p: dynamics.HwParams, belief: FilterBelief, u, dt, noise: NoiseConfig,
                jacobian="fd", substeps=EKF_SUBSTEPS):
    u = np.asarray(u, dtype=float)

    def f(x, uu=u):
        return dynamics.augmented_nonlinear_dynamics(p, x, uu)

    x_pri = belief.x_hat
    h = dt / substeps
    for _ in range(substeps):
        x_pri = rk4_step(f, x_pri, u, h)
    if jacobian == "fd":
        J = jacobian_fd(lambda x: f(x), belief.x_hat)
    elif jacobian == "analytic":
        J = dynamics.augmented_nonlinear_jacobian(p, belief.x_hat, u)
    else:
        raise ParameterError(f"unknown jacobian mode {jacobian!r}")
    A_d = expm(J * dt)
    P = A_d @ belief.P @ A_d.T + noise.Q
    return FilterBelief(x_pri, _sym(P))


def ekf_step(p: dynamics.HwParams, belief: FilterBelief, u, z, dt, noise: NoiseConfig,
             jacobian="fd", substeps=EKF_SUBSTEPS):
    """One EKF predict/correct cycle. Returns ``(posterior, innovation, gain)``.

    The state is propagated with ``substeps`` RK4 steps over ``dt``; the
    covariance with ``expm(J dt)`` of the Jacobian at the prior estimate.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    if substeps < 1:
        raise ParameterError("substeps must be >= 1")
    prior = ekf_predict(p, belief, u, dt, noise, jacobian=jacobian, substeps=substeps)
    return _correct(MEAS_MATRIX, prior, z, noise.R)


def riccati_step(model: KfModel, P_pri, noise: NoiseConfig):
    """Map an a-priori covariance to the next a-priori covariance; also returns the gain."""
    C = model.C
    S = C @ P_pri @ C.T + noise.R
    K = np.linalg.solve(S, C @ P_pri).T
    P_post = (np.eye(P_pri.shape[0]) - K @ C) @ P_pri
    return _sym(model.A_d @ P_post @ model.A_d.T + noise.Q), K


def steady_state(model: KfModel, noise: NoiseConfig, tol=1e-13, max_iter=200_000, P0=None):
    """Iterate the Riccati recursion to its fixed point.

    Convergence is declared when ``||P_{k+1} - P_k||_F <= tol * max(1, ||P_k||_F)``.
    Raises :class:`ConvergenceError` carrying the last iterate otherwise.
    """
    n = model.A_d.shape[0]
    P = np.zeros((n, n)) if P0 is None else np.asarray(P0, dtype=float)
    for k in range(1, max_iter + 1):
        P_next, K = riccati_step(model, P, noise)
        if not np.all(np.isfinite(P_next)):
            raise ConvergenceError("Riccati recursion produced non-finite values", last=P, iterations=k)
        delta = np.linalg.norm(P_next - P)
        P = P_next
        if delta <= tol * max(1.0, np.linalg.norm(P)):
            _, K = riccati_step(model, P, noise)
            return SteadyState(K_inf=K, P_inf=P, iterations=k)
    raise ConvergenceError(f"no convergence within {max_iter} iterations", last=P, iterations=max_iter)


class KalmanDOB:
    """Linear Kalman disturbance observer on the extended-state model."""

    kind = "kf"

    def __init__(self, params: dynamics.HwParams, dt, noise: NoiseConfig | None = None,
                 belief: FilterBelief | None = None):
        self.model = augmented_kf_model(params, dt)
        self.noise = noise or NoiseConfig()
        self.belief = belief or initial_belief()

    def correct(self, z):
        self.belief, innov, K = kf_correct(self.model, self.belief, z, self.noise)
        return innov, K

    def step(self, u, z):
        prior = kf_predict(self.model, self.belief, u, self.noise)
        self.belief, innov, K = kf_correct(self.model, prior, z, self.noise)
        return innov, K

    @property
    def torque(self):
        return float(self.belief.x_hat[4])


class ExtendedKalmanDOB(KalmanDOB):
    """EKF disturbance observer on the nonlinear extended-state model."""

    kind = "ekf"

    def __init__(self, params: dynamics.HwParams, dt, noise: NoiseConfig | None = None,
                 belief: FilterBelief | None = None, jacobian="fd", substeps=EKF_SUBSTEPS):
        self.params = params
        self.substeps = substeps
        self.dt = dt
        self.jacobian = jacobian
        self.model = KfModel(np.eye(5), np.zeros((5, 2)), MEAS_MATRIX, dt)
        self.noise = noise or NoiseConfig()
        self.belief = belief or initial_belief()

    def step(self, u, z):
        self.belief, innov, K = ekf_step(self.params, self.belief, u, z, self.dt, self.noise,
                                         jacobian=self.jacobian, substeps=self.substeps)
        return innov, K
