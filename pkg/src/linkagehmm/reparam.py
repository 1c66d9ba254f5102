"""Coordinate transforms between constrained and unconstrained parameters.

Optimization and differentiation run in free coordinates:

* the ancestry vector q maps to K-1 log-ratios y_k = log(q_k / q_K)
  relative to the last component; the inverse is a stable softmax with the
  reference logit pinned at 0;
* the rate r maps through the survival probability s = exp(-r) to its
  logit t, so the admixture limit r = INFINITY corresponds to t -> -inf
  and r = 0 to t -> +inf.
"""

from __future__ import annotations

import numpy as np

Q_FLOOR = 1e-12
R_FLOOR = 1e-12


def free_to_simplex(y) -> np.ndarray:
    """Inverse log-ratio transform; softmax of (y_1, ..., y_{K-1}, 0)."""
    z = np.append(np.asarray(y, dtype=float), 0.0)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def simplex_to_free(q) -> np.ndarray:
    """Log-ratios against the last component; zeros are floored first."""
    q = np.clip(np.asarray(q, dtype=float), Q_FLOOR, None)
    return np.log(q[:-1]) - np.log(q[-1])


def rate_to_free(r) -> float:
    """logit(exp(-r)), computed stably for both tiny and large r."""
    r = max(float(r), R_FLOOR)
    # log(s / (1-s)) with s = exp(-r):  -r - log(1 - exp(-r))
    return -r - np.log(-np.expm1(-r))


def free_to_rate(t) -> float:
    """Inverse of rate_to_free: r = softplus(-t) = log(1 + exp(-t))."""
    return float(np.logaddexp(0.0, -float(t)))


def simplex_jacobian(q) -> np.ndarray:
    """d q / d y at q = free_to_simplex(y); shape (K, K-1)."""
    q = np.asarray(q, dtype=float)
    K = q.size
    J = -np.outer(q, q[:-1])
    J[np.arange(K - 1), np.arange(K - 1)] += q[:-1]
    return J


def rate_jacobian(r) -> float:
    """d r / d t at r = free_to_rate(t); equals exp(-r) - 1."""
    return float(np.expm1(-float(r)))


def pack(q, r=None) -> np.ndarray:
    """Free coordinates of (q[, r]) as one flat vector."""
    y = simplex_to_free(q)
    if r is None:
        return y
    return np.append(y, rate_to_free(r))


def unpack(z, with_rate: bool):
    """Inverse of pack: (q, r) with r = None when with_rate is False."""
    z = np.asarray(z, dtype=float)
    if with_rate:
        return free_to_simplex(z[:-1]), free_to_rate(z[-1])
    return free_to_simplex(z), None


def theta_jacobian(q, r=None) -> np.ndarray:
    """Jacobian of (q[, r]) with respect to the free coordinates.

    Block diagonal: the softmax Jacobian for q and, when r is given, the
    scalar dr/dt appended in the corner.  Used to push covariance matrices
    from free coordinates to (q, r) coordinates.
    """
    Jq = simplex_jacobian(q)
    if r is None:
        return Jq
    K = Jq.shape[0]
    G = np.zeros((K + 1, K))
    G[:K, : K - 1] = Jq
    G[K, K - 1] = rate_jacobian(r)
    return G


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of v onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    tau = css[cond][-1] / rho
    return np.maximum(v - tau, 0.0)
