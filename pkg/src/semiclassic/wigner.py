"""Discrete Wigner transform and classical-limit concentration weights.

The transform is sampled on the natural lattice y_m = 2 m dx / eps, where
the two field arguments x +- eps y/2 land exactly on grid nodes, so the
correlation needs no interpolation. Momentum masses are window integrals of
the transform around each ray branch momentum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OverlappingBranches, WindowClipped
from .phase_space import flow_batch
from .ray_map import find_branches
from .reference import GUARD_FRACTION, WaveField
from .util import plateau_window

IMAG_TOL = 1e-8


@dataclass(frozen=True)
class WignerSlice:
    """Wigner values W(x, xi) at one spatial point over a momentum axis."""

    x: np.ndarray
    xi_grid: np.ndarray
    values: np.ndarray


def _snap_index(field: WaveField, x) -> int:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if field.grid.dim != 1:
        raise NotImplementedError("Wigner slices are implemented for 1-D fields")
    ax = field.grid.axes()[0]
    return int(np.argmin(np.abs(ax - x[0])))


def _guard_reach(field: WaveField, i0: int) -> int:
    n = field.grid.nodes[0]
    lo = int(np.ceil(GUARD_FRACTION / 2.0 * n))
    hi = n - 1 - lo
    return min(i0 - lo, hi - i0)


def _correlation_size(field: WaveField, i0: int, y_max) -> int:
    dy = 2.0 * field.grid.dx[0] / field.eps
    reach = _guard_reach(field, i0)
    if reach < 1:
        raise WindowClipped("evaluation point sits inside the guard band")
    if y_max is None:
        return reach
    m = int(np.floor(float(y_max) / dy))
    if m > reach:
        raise WindowClipped(
            f"correlation window needs {m} samples but only {reach} fit "
            "inside the guard band")
    return max(m, 1)


def default_y_max(eps: float, window_width: float = 0.2) -> float:
    """Correlation length resolving both window edges and sqrt(eps) peaks."""
    return max(48.0 / window_width, 8.0 / np.sqrt(eps))


def marginal_xi_grid(field: WaveField, x, y_max=None) -> np.ndarray:
    """Momentum grid conjugate to the correlation lattice at x.

    Summing a transform over this grid times its spacing reproduces
    |psi(x)|^2 exactly (discrete orthogonality), which makes the marginal
    identity testable to machine precision.
    """
    i0 = _snap_index(field, x)
    m = _correlation_size(field, i0, y_max)
    dy = 2.0 * field.grid.dx[0] / field.eps
    dxi = 2.0 * np.pi / ((2 * m + 1) * dy)
    return dxi * (np.arange(2 * m + 1) - m)


def wigner_transform(field: WaveField, x, xi_grid, y_max=None) -> WignerSlice:
    """Wigner slice W(x, .) of a 1-D field on the given momentum grid.

    x snaps to the nearest grid node. The correlation window spans
    |y| <= y_max (all of the guard-band reach when y_max is None); it must
    fit inside the inner 80% of the box or WindowClipped is raised. The
    imaginary residue must stay below 1e-8 of the slice scale and is then
    discarded.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    i0 = _snap_index(field, x)
    m = _correlation_size(field, i0, y_max)
    dy = 2.0 * field.grid.dx[0] / field.eps

    vals = field.values
    idx = np.arange(-m, m + 1)
    corr = vals[i0 + idx] * np.conj(vals[i0 - idx])
    y_m = dy * idx
    kernel = np.exp(-1j * np.outer(xi_grid, y_m))
    w = (dy / (2.0 * np.pi)) * (kernel @ corr)

    scale = max(1e-300, float(np.max(np.abs(w))))
    if float(np.max(np.abs(w.imag))) > IMAG_TOL * max(1.0, scale):
        raise ValueError("Wigner slice has a non-negligible imaginary part")
    ax = field.grid.axes()[0]
    return WignerSlice(x=np.array([ax[i0]]), xi_grid=xi_grid.copy(),
                       values=w.real)


def branch_momenta(scenario, t: float, x):
    """Branches at (t, x) and their transported momenta Xi_t."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    branches = find_branches(scenario.potential, scenario.initial_phase, t, x,
                             scenario.search_box,
                             grid_density=scenario.grid_density,
                             dt=scenario.flow_dt)
    ys = np.array([b.y for b in branches])
    etas = np.array([b.xi0 for b in branches])
    fb = flow_batch(scenario.potential, ys, etas, float(t), scenario.flow_dt)
    return branches, fb.xi


def concentration_weights(field: WaveField, scenario, t: float, x,
                          window_width: float = 0.2, y_max=None,
                          x_average_width=None) -> list:
    """Momentum mass near each branch momentum: [(xi_center, mass), ...].

    Integrates the Wigner slice against a smooth plateau window (1 on the
    inner half, smooth decay to 0 at the edge) centered on each transported
    branch momentum. The limit measure lives in distributions over position
    and momentum jointly, so with several branches the slice is also
    averaged over a Gaussian x-window (default width sqrt(eps), std half
    that); this damps the oscillatory cross terms that two branches park at
    their momentum midpoint, which a fixed-x slice would otherwise pick up
    undiminished. As eps decreases the masses approach the classical
    weights |a(y_j)|^2 / J_j. Branch momenta closer than twice the window
    width raise OverlappingBranches.
    """
    branches, momenta = branch_momenta(scenario, t, x)
    if scenario.dimension != 1:
        raise NotImplementedError("concentration weights are 1-D")
    centers = momenta[:, 0]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if abs(centers[i] - centers[j]) <= 2.0 * window_width:
                raise OverlappingBranches(
                    f"branch momenta {centers[i]:.4f} and {centers[j]:.4f} "
                    f"are closer than 2 * window_width = {2 * window_width}")

    if y_max is None:
        y_max = default_y_max(field.eps, window_width)
    if x_average_width is None:
        x_average_width = 0.0 if len(centers) == 1 else np.sqrt(field.eps)

    ax = field.grid.axes()[0]
    i0 = _snap_index(field, x)
    if x_average_width > 0.0:
        sigma = 0.5 * x_average_width
        reach = int(np.floor(4.0 * sigma / field.grid.dx[0]))
        nodes = np.arange(i0 - reach, i0 + reach + 1)
        u = np.exp(-0.5 * ((ax[nodes] - ax[i0]) / sigma) ** 2)
    else:
        nodes = np.array([i0])
        u = np.ones(1)
    u = u / np.sum(u)

    dxi = np.pi / (2.0 * y_max)
    out = []
    for c in centers:
        n_half = int(np.ceil(window_width / dxi))
        grid = c + dxi * np.arange(-n_half, n_half + 1)
        weight = plateau_window((grid - c) / window_width)
        mass = 0.0
        for node, uw in zip(nodes, u):
            w = wigner_transform(field, float(ax[node]), grid, y_max=y_max)
            mass += uw * float(np.trapezoid(w.values * weight, grid))
        out.append((float(c), mass))
    return out
