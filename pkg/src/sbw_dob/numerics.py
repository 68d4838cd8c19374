"""Small dense linear-algebra and integration helpers used by the estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# diagonal Pade(6, 6) coefficients c_k = (12-k)! 6! / (12! k! (6-k)!)
_PADE6 = [math.factorial(12 - k) * math.factorial(6)
          / (math.factorial(12) * math.factorial(k) * math.factorial(6 - k))
          for k in range(7)]


def expm(M):
    """Matrix exponential by scaling and squaring around a Pade(6, 6) kernel.

    The matrix is scaled by ``2**-s`` until its 1-norm is at most 0.5, where
    the (6, 6) approximant is accurate to roughly machine precision, and the
    result is squared ``s`` times.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expm needs a square matrix, got shape {M.shape}")
    n = M.shape[0]
    norm = np.linalg.norm(M, 1)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    X = M / (2.0 ** s)

    ident = np.eye(n)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    c = _PADE6
    U = X @ (c[1] * ident + c[3] * X2 + c[5] * X4)
    V = c[0] * ident + c[2] * X2 + c[4] * X4 + c[6] * X6
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def rk4_step(f, x, u, dt):
    """One classical Runge-Kutta step of ``x' = f(x, u)`` with ``u`` held constant."""
    x = np.asarray(x, dtype=float)
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def jacobian_fd(f, x, h=None):
    """Central-difference Jacobian of ``f`` at ``x``.

    ``h`` may be a scalar step or None, in which case each component uses
    ``1e-6 * max(1, |x_i|)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    if h is None:
        steps = 1e-6 * np.maximum(1.0, np.abs(x))
    else:
        steps = np.full(n, float(h))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = steps[i]
        cols.append((np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2.0 * steps[i]))
    return np.column_stack(cols)


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    condition_2norm: float
    singular_values: tuple

    @property
    def full_rank(self):
        return self.rank == len(self.singular_values)


def observability_matrix(A, C):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or C.shape[1] != n:
        raise DimensionError(f"incompatible shapes A{A.shape}, C{C.shape}")
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def observability(A, C):
    """Rank and 2-norm condition number of ``[C; CA; ...; CA^(n-1)]``."""
    O = observability_matrix(A, C)
    n = O.shape[1]
    sv = np.linalg.svd(O, compute_uv=False)
    tol = sv[0] * max(O.shape[0], n) * 2.0 ** -52 if sv.size else 0.0
    rank = int(np.sum(sv > tol))
    if rank < n or sv[-1] == 0.0:
        cond = math.inf
    else:
        cond = float(sv[0] / sv[-1])
    return ObservabilityReport(rank=rank, condition_2norm=cond,
                               singular_values=tuple(float(v) for v in sv))
