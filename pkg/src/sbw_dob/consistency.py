"""Statistical consistency checks for a Kalman filter on a matched linear model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import estimation


@dataclass(eq=False)
class MatchedRun:
    x_true: np.ndarray      # (N, n) truth states
    x_post: np.ndarray      # (N, n) a-posteriori estimates
    P_post: np.ndarray      # (N, n, n)
    innovations: np.ndarray  # (N, m)
    S: np.ndarray           # (N, m, m) innovation covariances


def run_matched_linear(model: estimation.KfModel, noise: estimation.NoiseConfig, n_steps,
                       seed=0, u=None, P0=None):
    """Simulate ``x+ = A_d x + B_d u + w``, ``z = C x + v`` with ``w ~ N(0, Q)``,
    ``v ~ N(0, R)`` and run the matched filter on it.

    The initial truth is drawn from ``N(0, P0)`` so the filter is consistent
    from the first step.
    """
    rng = np.random.default_rng(seed)
    n = model.A_d.shape[0]
    m = model.C.shape[0]
    P0 = 1e-3 * np.eye(n) if P0 is None else P0
    u = np.zeros((n_steps, model.B_d.shape[1])) if u is None else np.asarray(u, dtype=float)
    Lq = _chol_psd(noise.Q)
    Lr = np.linalg.cholesky(noise.R)
    x = _chol_psd(P0) @ rng.standard_normal(n)
    belief = estimation.FilterBelief(np.zeros(n), P0.copy())
    out = MatchedRun(np.zeros((n_steps, n)), np.zeros((n_steps, n)), np.zeros((n_steps, n, n)),
                     np.zeros((n_steps, m)), np.zeros((n_steps, m, m)))
    for k in range(n_steps):
        if k > 0:
            x = model.A_d @ x + model.B_d @ u[k - 1] + Lq @ rng.standard_normal(n)
            belief = estimation.kf_predict(model, belief, u[k - 1], noise)
        z = model.C @ x + Lr @ rng.standard_normal(m)
        out.S[k] = model.C @ belief.P @ model.C.T + noise.R
        belief, innov, _ = estimation.kf_correct(model, belief, z, noise)
        out.x_true[k] = x
        out.x_post[k] = belief.x_hat
        out.P_post[k] = belief.P
        out.innovations[k] = innov
    return out


def _chol_psd(M):
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def nees(run: MatchedRun):
    """Per-step normalized estimation error squared."""
    err = run.x_true - run.x_post
    return np.einsum("ki,ki->k", err, np.linalg.solve(run.P_post, err[..., None])[..., 0])


def nis(run: MatchedRun):
    """Per-step normalized innovation squared."""
    e = run.innovations
    return np.einsum("ki,ki->k", e, np.linalg.solve(run.S, e[..., None])[..., 0])


def chi2_band(dof, n_samples, prob=0.99):
    """Two-sided band for the mean of ``n_samples`` independent chi-square(dof) variates."""
    lo, hi = stats.chi2.ppf([(1 - prob) / 2, (1 + prob) / 2], dof * n_samples)
    return lo / n_samples, hi / n_samples


def autocorrelation(x, max_lag):
    """Normalized autocorrelation of ``x`` at lags ``1..max_lag``."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    den = np.dot(x, x)
    return np.array([np.dot(x[:-lag], x[lag:]) / den for lag in range(1, max_lag + 1)])


def whiteness_bound(n_samples, k_sigma=3.0):
    return k_sigma / np.sqrt(n_samples)
