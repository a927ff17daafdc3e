"""Small numeric helpers used by several modules."""

from __future__ import annotations

import numpy as np


def fd_gradient(fn, points, step=1e-5):
    """Central-difference gradient of a scalar field at (B, N) points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    b, n = points.shape
    out = np.empty((b, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        out[:, k] = (fn(points + e) - fn(points - e)) / (2.0 * step)
    return out


def fd_jacobian(fn, points, step=1e-5):
    """Central-difference Jacobian of an (B, N) -> (B, M) map."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    b, n = points.shape
    m = np.atleast_2d(fn(points)).shape[1]
    out = np.empty((b, m, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        out[:, :, k] = (fn(points + e) - fn(points - e)) / (2.0 * step)
    return out


def max_rel_error(approx, exact):
    """Max entrywise |approx - exact| / max(1, |exact|) over a batch."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    scale = np.maximum(1.0, np.abs(exact))
    return float(np.max(np.abs(approx - exact) / scale))


def det_small(mats):
    """Determinants of a (B, N, N) stack; direct formulas for N <= 3.

    np.linalg.det dispatches to LAPACK per matrix, which dominates the cost
    of caustic scans; tiny sizes are done inline instead.
    """
    mats = np.asarray(mats)
    n = mats.shape[-1]
    if n == 1:
        return mats[..., 0, 0].copy()
    if n == 2:
        return (mats[..., 0, 0] * mats[..., 1, 1]
                - mats[..., 0, 1] * mats[..., 1, 0])
    if n == 3:
        a, b, c = mats[..., 0, 0], mats[..., 0, 1], mats[..., 0, 2]
        d, e, f = mats[..., 1, 0], mats[..., 1, 1], mats[..., 1, 2]
        g, h, i = mats[..., 2, 0], mats[..., 2, 1], mats[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(mats)


def mollifier(u):
    """C-infinity bump: exp(1 - 1/(1-u^2)) for |u| < 1, zero outside.

    Normalized so the value at u = 0 is exactly 1.
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    if np.any(inside):
        ui = u[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def smoothstep(s):
    """C-infinity transition from 1 at s <= 0 down to 0 at s >= 1."""
    s = np.asarray(s, dtype=float)

    def _ramp(v):
        out = np.zeros_like(v)
        pos = v > 0.0
        out[pos] = np.exp(-1.0 / v[pos])
        return out

    up = _ramp(1.0 - s)
    down = _ramp(s)
    return up / (up + down + np.finfo(float).tiny)


def plateau_window(u):
    """Smooth window: 1 on |u| <= 1/2, C-infinity decay to 0 at |u| = 1."""
    u = np.abs(np.asarray(u, dtype=float))
    return smoothstep(2.0 * u - 1.0)


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0
