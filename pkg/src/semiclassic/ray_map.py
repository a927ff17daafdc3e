"""Ray map F_t(y) = X_t(y, grad S_in(y)): Jacobians, branches, caustic times.

Branches (preimages of a point under the ray map) are found by multi-start
Newton iteration over a search box; caustic times along a ray are located by
scanning det DF_s for sign changes and refining each one by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CausticProximity, NoRoot
from .phase_space import DEFAULT_DT, PotentialModel, flow_batch, rk4_step
from .util import det_small, fd_gradient, fd_jacobian, max_rel_error

CAUSTIC_THRESHOLD = 1e-6
CHECKPOINT_EVERY = 64
# roots with J below this band get extra Newton sweeps: on a degenerate fold
# the iterates keep halving their distance to the fold point, which drives J
# under the caustic threshold, while an honest nearby branch stays put
REFINE_BAND = 1e-3
NEAR_MERGE = 1e-6


@dataclass(frozen=True)
class InitialPhase:
    """Initial phase S_in with analytic gradient and Hessian.

    Evaluators are batched like PotentialModel's. `sublinear` records whether
    |grad S_in(y)| / |y| -> 0 at infinity is known to hold; quadratic phases
    with a nonzero matrix do not satisfy it, bounded-gradient phases do.
    """

    dimension: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    tag: str = "custom"
    sublinear: bool = False


def quadratic_phase(matrix) -> InitialPhase:
    """S_in(y) = y . A y / 2 with A symmetric."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("quadratic phase matrix must be square")
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise ValueError("quadratic phase matrix must be symmetric")
    n = a.shape[0]

    def value(y):
        y = np.asarray(y)
        return 0.5 * np.sum(y * (y @ a.T), axis=-1)

    def gradient(y):
        return np.asarray(y) @ a.T

    def hessian(y):
        shape = np.shape(y)[:-1]
        return np.broadcast_to(a, shape + a.shape).copy()

    return InitialPhase(n, value, gradient, hessian, tag="quadratic",
                        sublinear=bool(np.all(a == 0.0)))


def cosine_phase(amplitude: float = 1.0, wavenumber: float = 1.0,
                 dimension: int = 1) -> InitialPhase:
    """S_in(y) = amplitude * sum_i cos(k y_i); gradient is bounded."""
    amp = float(amplitude)
    k = float(wavenumber)

    def value(y):
        return amp * np.sum(np.cos(k * np.asarray(y)), axis=-1)

    def gradient(y):
        return -amp * k * np.sin(k * np.asarray(y))

    def hessian(y):
        y = np.asarray(y)
        out = np.zeros(y.shape + (dimension,))
        idx = np.arange(dimension)
        out[..., idx, idx] = -amp * k * k * np.cos(k * y)
        return out

    return InitialPhase(dimension, value, gradient, hessian, tag="cosine",
                        sublinear=True)


@dataclass(frozen=True)
class RayMapValue:
    """Ray map output: image point, Jacobian matrix, |det|."""

    x: np.ndarray
    DF: np.ndarray
    J: float


@dataclass(frozen=True)
class Branch:
    """One preimage of x under F_t, with launch momentum and Jacobian."""

    y: np.ndarray
    xi0: np.ndarray
    J: float
    index: int
    caustic_proximal: bool = False


def phase_consistency(sin: InitialPhase, points, step: float = 1e-5):
    """Max relative mismatch of (gradient vs value) and (hessian vs gradient)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g_err = max_rel_error(fd_gradient(sin.value, points, step), sin.gradient(points))
    h_err = max_rel_error(fd_jacobian(sin.gradient, points, step), sin.hessian(points))
    return g_err, h_err


def _ray_map_batch(potential, sin, ys, ts, dt=DEFAULT_DT):
    """Batched F_t(y), endpoint momentum, DF and J = |det DF|."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    n = sin.dimension
    fb = flow_batch(potential, ys, sin.gradient(ys), ts, dt)
    df = fb.jac[:, :n, :n] + fb.jac[:, :n, n:] @ sin.hessian(ys)
    return fb.x, fb.xi, df, np.abs(det_small(df)), fb.action


def ray_map(potential: PotentialModel, sin: InitialPhase, y, t: float,
            dt: float = DEFAULT_DT) -> RayMapValue:
    """Evaluate F_t at one initial position y.

    DF is assembled from the flow linearization blocks by the chain rule
    through the launch momentum grad S_in(y).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, _, df, j, _ = _ray_map_batch(potential, sin, y[None, :], float(t), dt)
    return RayMapValue(x=x[0].copy(), DF=df[0].copy(), J=float(j[0]))


def _as_box(box, n):
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box[None, :]
    if box.shape != (n, 2) or np.any(box[:, 0] >= box[:, 1]):
        raise ValueError("search box must be (N, 2) with lo < hi per axis")
    return box


def _grid_starts(box, density):
    axes = [np.linspace(lo, hi, density) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def find_branches_many(potential, sin, ts, xs, box, grid_density=64, tol=1e-9,
                       dt=DEFAULT_DT, caustic_threshold=CAUSTIC_THRESHOLD,
                       max_sweeps=14):
    """Multi-start Newton branch search for a batch of targets.

    ts: scalar or (S,) times; xs: (S, N) target points sharing one search
    box. Returns a list of per-sample branch lists (possibly empty, with
    caustic-proximal roots flagged rather than raised); `find_branches` adds
    the strict error policy on top.
    """
    n = sin.dimension
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    s_count = xs.shape[0]
    ts = np.broadcast_to(np.asarray(ts, dtype=float), (s_count,))
    box = _as_box(box, n)
    starts = _grid_starts(box, grid_density)
    g = starts.shape[0]

    y = np.tile(starts, (s_count, 1))
    t_rep = np.repeat(ts, g)
    x_rep = np.repeat(xs, g, axis=0)
    total = s_count * g

    margin = 0.5 * (box[:, 1] - box[:, 0])
    lo = box[:, 0] - margin
    hi = box[:, 1] + margin
    max_step = 2.0 * np.max(hi - lo)

    alive = np.ones(total, dtype=bool)
    converged = np.zeros(total, dtype=bool)
    res = np.full(total, np.inf)
    j_all = np.zeros(total)
    xi_all = np.zeros((total, n))

    for _ in range(max_sweeps):
        idx = np.flatnonzero(alive & ~converged)
        if idx.size == 0:
            break
        f, xi, df, j, _ = _ray_map_batch(potential, sin, y[idx], t_rep[idx], dt)
        r = f - x_rep[idx]
        rn = np.linalg.norm(r, axis=1)
        res[idx] = rn
        j_all[idx] = j
        xi_all[idx] = sin.gradient(y[idx])
        hit = rn <= tol
        converged[idx[hit]] = True

        sub = idx[~hit]
        if sub.size == 0:
            continue
        dfs = df[~hit]
        dets = det_small(dfs)
        singular = np.abs(dets) < 1e-300
        step = np.zeros((sub.size, n))
        ok = ~singular
        if np.any(ok):
            step[ok] = np.linalg.solve(dfs[ok], r[~hit][ok][..., None])[..., 0]
        bad = singular | ~np.all(np.isfinite(step), axis=1) \
            | (np.linalg.norm(step, axis=1) > max_step)
        alive[sub[bad]] = False
        upd = sub[~bad]
        y[upd] -= step[~bad]
        out = np.any((y[upd] < lo) | (y[upd] > hi), axis=1)
        alive[upd[out]] = False

    def dedup(indices, radius):
        reps = []
        for i in indices:
            dup = False
            for k, rep in enumerate(reps):
                if np.linalg.norm(y[i] - y[rep]) <= radius:
                    if res[i] < res[rep]:
                        reps[k] = i
                    dup = True
                    break
            if not dup:
                reps.append(i)
        return reps

    reps_per_sample = []
    suspicious = []
    for s in range(s_count):
        sel = np.flatnonzero(converged[s * g:(s + 1) * g]) + s * g
        sel = sel[np.lexsort(y[sel].T[::-1])] if sel.size else sel
        reps = dedup(sel, 10.0 * tol)
        reps_per_sample.append(reps)
        suspicious.extend(i for i in reps if j_all[i] < REFINE_BAND)

    if suspicious:
        sus = np.asarray(suspicious)
        y_ref, _, _, _, _, j_ref, _ = _refine_batch(
            potential, sin, t_rep[sus], x_rep[sus], y[sus],
            tol=100.0 * np.finfo(float).eps, dt=dt, max_iter=30)
        y[sus] = y_ref
        j_all[sus] = j_ref
        xi_all[sus] = sin.gradient(y_ref)

    results = []
    for reps in reps_per_sample:
        reps = dedup(sorted(reps, key=lambda i: tuple(y[i])),
                     max(10.0 * tol, NEAR_MERGE))
        branches = [
            Branch(y=y[i].copy(), xi0=xi_all[i].copy(), J=float(j_all[i]),
                   index=rank + 1,
                   caustic_proximal=bool(j_all[i] < caustic_threshold))
            for rank, i in enumerate(reps)
        ]
        results.append(branches)
    return results


def find_branches(potential: PotentialModel, sin: InitialPhase, t: float, x,
                  box, grid_density: int = 64, tol: float = 1e-9,
                  dt: float = DEFAULT_DT,
                  caustic_threshold: float = CAUSTIC_THRESHOLD) -> list[Branch]:
    """All preimages of x under F_t inside the search box.

    Newton iteration from every node of a uniform grid over the box;
    converged roots are deduplicated at distance 10*tol and returned in
    lexicographic order. Raises NoRoot when nothing converges and
    CausticProximity when an accepted root has J below the threshold.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    branches = find_branches_many(potential, sin, float(t), x[None, :], box,
                                  grid_density=grid_density, tol=tol, dt=dt,
                                  caustic_threshold=caustic_threshold)[0]
    if not branches:
        raise NoRoot(f"no Newton start converged for x={x} at t={t}; "
                     "box too small or x out of range")
    flagged = [b for b in branches if b.caustic_proximal]
    if flagged:
        raise CausticProximity(
            f"(t={t}, x={x}) lies on the caustic within resolution: "
            f"min J = {min(b.J for b in flagged):.3e}", branches)
    return branches


def refine_branch(potential, sin, t, x, y0, tol=1e-9, dt=DEFAULT_DT,
                  max_iter=12):
    """Warm-started Newton refinement of a single branch root.

    Returns (y, J, converged); used for branch tracking across nearby
    evaluation points.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    ys, conv, _, _, df, j, _ = _refine_batch(
        potential, sin, np.array([float(t)]), x[None, :], y0[None, :],
        tol=tol, dt=dt, max_iter=max_iter)
    return ys[0], float(j[0]), bool(conv[0])


def _refine_batch(potential, sin, ts, xs, y0s, tol=1e-9, dt=DEFAULT_DT,
                  max_iter=12):
    """Vectorized warm-start Newton; every element keeps its own target.

    Returns (y, converged, F, xi_t, DF, J, action) evaluated at the final
    iterate of each element.
    """
    y = np.atleast_2d(np.asarray(y0s, dtype=float)).copy()
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    b = y.shape[0]
    ts = np.broadcast_to(np.asarray(ts, dtype=float), (b,))
    converged = np.zeros(b, dtype=bool)
    y_fin = y.copy()
    f_fin = np.zeros_like(y)
    xi_fin = np.zeros_like(y)
    df_fin = np.zeros((b, y.shape[1], y.shape[1]))
    j_fin = np.zeros(b)
    act_fin = np.zeros(b)

    for _ in range(max_iter):
        idx = np.flatnonzero(~converged)
        if idx.size == 0:
            break
        f, xi, df, j, act = _ray_map_batch(potential, sin, y[idx], ts[idx], dt)
        y_fin[idx], f_fin[idx], xi_fin[idx] = y[idx], f, xi
        df_fin[idx], j_fin[idx], act_fin[idx] = df, j, act
        r = f - xs[idx]
        hit = np.linalg.norm(r, axis=1) <= tol
        converged[idx[hit]] = True
        sub = idx[~hit]
        if sub.size == 0:
            break
        dets = det_small(df[~hit])
        ok = np.abs(dets) > 1e-300
        step = np.zeros((sub.size, y.shape[1]))
        if np.any(ok):
            step[ok] = np.linalg.solve(df[~hit][ok],
                                       r[~hit][ok][..., None])[..., 0]
        step[~np.isfinite(step).all(axis=1)] = 0.0
        y[sub] -= step
    return y_fin, converged, f_fin, xi_fin, df_fin, j_fin, act_fin


def _det_along(jac, hess0):
    n = hess0.shape[-1]
    df = jac[:, :n, :n] + jac[:, :n, n:] @ hess0
    return det_small(df)


def detect_det_events(d, graze_tol=1e-6):
    """Classify a sampled determinant sequence along a ray.

    Returns (sign_changes, exact_zeros, grazes) as index lists: k in
    sign_changes brackets a zero in (k, k+1); exact_zeros hit a node;
    grazes are interior local minima of |d| below graze_tol * scale with no
    adjacent sign change, the signature of a degenerate touch.
    """
    d = np.asarray(d, dtype=float)
    scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
    sign_changes = [int(k) for k in np.flatnonzero(d[:-1] * d[1:] < 0.0)]
    zeros = [int(k) for k in np.flatnonzero(d == 0.0) if k > 0]
    grazes = []
    small = np.abs(d) < graze_tol * scale
    for k in range(1, d.size - 1):
        if not small[k] or d[k] == 0.0:
            continue
        if abs(d[k]) > abs(d[k - 1]) or abs(d[k]) > abs(d[k + 1]):
            continue
        if d[k - 1] * d[k] < 0.0 or d[k] * d[k + 1] < 0.0:
            continue
        grazes.append(k)
    return sign_changes, zeros, grazes


def caustic_times_many(potential, sin, ys, t_maxs, dt=DEFAULT_DT,
                       transversality_tol=1e-6, resolution=1e-10,
                       graze_tol=1e-6):
    """Caustic crossing times along a batch of rays.

    Returns (crossings, end_dets): per-ray sorted lists of (s_k, transversal)
    and the value of det DF at each ray's final time. Sign changes of
    det DF_s on the scan grid are refined by bisection to `resolution`;
    grid-local minima of |det DF| below graze_tol * scale without a sign
    change are reported as non-transversal touches.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    b, n = ys.shape
    t_maxs = np.broadcast_to(np.asarray(t_maxs, dtype=float), (b,)).astype(float)
    etas = sin.gradient(ys)
    hess0 = sin.hessian(ys)

    n_steps = int(np.max(np.ceil(t_maxs / dt))) if np.any(t_maxs > 0) else 0
    dts = t_maxs / max(n_steps, 1)

    x = ys.copy()
    xi = np.asarray(etas, dtype=float).copy()
    jac = np.broadcast_to(np.eye(2 * n), (b, 2 * n, 2 * n)).copy()
    act = np.zeros(b)

    dets = np.empty((n_steps + 1, b))
    dets[0] = _det_along(jac, hess0)
    checkpoints = {}
    for k in range(n_steps):
        if k % CHECKPOINT_EVERY == 0:
            checkpoints[k] = (x.copy(), xi.copy(), jac.copy(), act.copy())
        x, xi, jac, act = rk4_step(potential, x, xi, jac, act, dts)
        dets[k + 1] = _det_along(jac, hess0)

    def state_at_step(i, k):
        c = (k // CHECKPOINT_EVERY) * CHECKPOINT_EVERY
        while c not in checkpoints:  # k may equal n_steps (endpoint zero)
            c -= CHECKPOINT_EVERY
        cx, cxi, cjac, cact = checkpoints[c]
        sx, sxi = cx[i:i + 1].copy(), cxi[i:i + 1].copy()
        sjac, sact = cjac[i:i + 1].copy(), cact[i:i + 1].copy()
        h = np.array([dts[i]])
        for _ in range(k - c):
            sx, sxi, sjac, sact = rk4_step(potential, sx, sxi, sjac, sact, h)
        return sx, sxi, sjac, sact

    def det_from(i, state, delta):
        # bracket is at most one scan step wide; a single RK4 step suffices
        sx, sxi, sjac, sact = state
        sx, sxi, sjac, _ = rk4_step(potential, sx, sxi, sjac, sact,
                                    np.array([delta]))
        return float(_det_along(sjac, hess0[i][None])[0])

    results = []
    for i in range(b):
        d = dets[:, i]
        h = float(dts[i])
        found = []
        if h == 0.0:
            results.append(found)
            continue

        sign_changes, zero_hits, grazes = detect_det_events(d, graze_tol)

        for k in sign_changes:
            state_a = state_at_step(i, int(k))
            a_off, b_off = 0.0, h
            da = d[k]
            while (b_off - a_off) > 2.0 * resolution:
                mid = 0.5 * (a_off + b_off)
                dm = det_from(i, state_a, mid)
                if dm == 0.0:
                    a_off = b_off = mid
                    break
                if (dm > 0.0) == (da > 0.0):
                    a_off = mid
                else:
                    b_off = mid
            off = 0.5 * (a_off + b_off)
            s_k = k * h + off
            delta = 1e-6
            slope = (det_from(i, state_a, off + delta)
                     - det_from(i, state_a, off - delta)) / (2.0 * delta)
            found.append((s_k, bool(abs(slope) > transversality_tol)))

        for k in zero_hits:
            state_a = state_at_step(i, int(k))
            delta = 1e-6
            slope = (det_from(i, state_a, delta) - det_from(i, state_a, -delta)) \
                / (2.0 * delta)
            found.append((k * h, bool(abs(slope) > transversality_tol)))

        # grazing touches: |d| dips below tolerance without changing sign;
        # refine with the parabola through the three samples
        for k in grazes:
            denom = d[k + 1] - 2.0 * d[k] + d[k - 1]
            off = 0.0 if denom == 0.0 else \
                -0.5 * h * (d[k + 1] - d[k - 1]) / denom
            found.append((k * h + off, False))

        found.sort(key=lambda c: c[0])
        results.append(found)
    return results, dets[-1].copy()


def caustic_times(potential: PotentialModel, sin: InitialPhase, y,
                  t_max: float, dt: float = DEFAULT_DT,
                  transversality_tol: float = 1e-6) -> list[tuple[float, bool]]:
    """Times in (0, t_max] where det DF_s(y) vanishes, with transversality.

    dt must be small enough that det DF_s changes sign at most once per
    step; each detected change is refined by bisection to 1e-10 in s.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    crossings, _ = caustic_times_many(potential, sin, y[None, :],
                                      float(t_max), dt=dt,
                                      transversality_tol=transversality_tol)
    return crossings[0]
