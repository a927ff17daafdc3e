"""Maslov index of a ray segment, computed two independent ways.

For free motion the index is the number of negative eigenvalues of
I + t * hess(S_in) at the branch point; in general it is the number of
transversal caustic crossings along the trajectory, each counted +1 because
the linearized flow of |xi|^2/2 + V(x) crosses the singular set in a fixed
direction. The block-determinant identity det([[A,B],[C,D]]) = det(DA - CB)
for commuting A, B is exposed as a utility with the same one-sided check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ray_map as _rm
from .errors import NonTransversalCrossing, NotCommuting, OnCaustic
from .phase_space import DEFAULT_DT, PotentialModel
from .ray_map import CAUSTIC_THRESHOLD, InitialPhase


@dataclass(frozen=True)
class MaslovReport:
    """Integer index plus the crossing record that produced it."""

    index: int
    crossings: list
    method: str  # "free_eigenvalue" | "crossing_count"


def maslov_free(sin_hessian, t: float, tol: float = 1e-10) -> int:
    """Index for V = 0: count of eigenvalues with 1 + t*lambda < 0.

    Raises OnCaustic when some 1 + t*lambda vanishes to within tol, i.e.
    the point sits on the caustic and the count is ill-defined.
    """
    h = np.atleast_2d(np.asarray(sin_hessian, dtype=float))
    if np.max(np.abs(h - h.T)) > 1e-10:
        raise ValueError("initial-phase Hessian must be symmetric")
    lams = np.linalg.eigvalsh(h)
    shifted = 1.0 + float(t) * lams
    if np.any(np.abs(shifted) < tol):
        raise OnCaustic(f"1 + t*lambda vanishes within {tol} for t={t}")
    return int(np.count_nonzero(shifted < 0.0))


def maslov_crossings_many(potential, sin, ys, ts, dt=DEFAULT_DT,
                          caustic_threshold=CAUSTIC_THRESHOLD):
    """Crossing-count reports for a batch of rays (one per (y, t) pair)."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    crossings, end_dets = _rm.caustic_times_many(potential, sin, ys, ts, dt=dt)
    reports = []
    for i, found in enumerate(crossings):
        if abs(end_dets[i]) <= caustic_threshold:
            raise OnCaustic(
                f"endpoint det DF = {end_dets[i]:.3e} is below the caustic "
                f"threshold for y={ys[i]}")
        bad = [s for s, transversal in found if not transversal]
        if bad:
            raise NonTransversalCrossing(
                f"degenerate caustic touch at s={bad} for y={ys[i]}; "
                "crossing count is not reliable")
        reports.append(MaslovReport(index=len(found), crossings=found,
                                    method="crossing_count"))
    return reports


def maslov_crossings(potential: PotentialModel, sin: InitialPhase, y,
                     t: float, dt: float = DEFAULT_DT,
                     caustic_threshold: float = CAUSTIC_THRESHOLD) -> MaslovReport:
    """Index of the ray launched at (y, grad S_in(y)) over (0, t).

    Counts transversal zeros of s -> det DF_s(y); every crossing adds +1.
    The endpoint must be off-caustic.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return maslov_crossings_many(potential, sin, y[None, :], float(t), dt=dt,
                                 caustic_threshold=caustic_threshold)[0]


def det_block_commuting(a, b, c, d, commute_tol: float = 1e-10):
    """det of [[A, B], [C, D]] via det(DA - CB), valid when AB = BA."""
    a, b = np.atleast_2d(np.asarray(a)), np.atleast_2d(np.asarray(b))
    c, d = np.atleast_2d(np.asarray(c)), np.atleast_2d(np.asarray(d))
    if np.max(np.abs(a @ b - b @ a)) > commute_tol:
        raise NotCommuting("A and B do not commute; the shortcut "
                           "det(DA - CB) does not apply")
    return np.linalg.det(d @ a - c @ b)
