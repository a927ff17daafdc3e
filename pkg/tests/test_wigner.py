"""Wigner slices and momentum concentration against closed forms."""

import numpy as np
import pytest

from semiclassic.errors import OverlappingBranches, WindowClipped
from semiclassic.reference import SpatialGrid, WaveField, wkb_initial_field
from semiclassic.wigner import (
    branch_momenta,
    concentration_weights,
    marginal_xi_grid,
    wigner_transform,
)

YSTAR = 1.8954942670339783
J_YSTAR = 1.6380450482852327


def _plane_wave_field(eps=0.05, xi0=0.4):
    grid = SpatialGrid((-8.0 * np.pi,), (16.0 * np.pi,), (1024,))
    x = grid.axes()[0]
    # snap the carrier to an exact grid mode
    k = round(xi0 / eps * grid.length[0] / (2.0 * np.pi)) * 2.0 * np.pi / grid.length[0]
    return WaveField(grid, 0.0, eps, np.exp(1j * k * x)), k * eps


def test_plane_wave_peaks_at_carrier():
    field, xi0 = _plane_wave_field()
    xi_grid = np.linspace(-1.0, 1.0, 801)
    w = wigner_transform(field, 0.0, xi_grid, y_max=200.0)
    peak = w.xi_grid[int(np.argmax(w.values))]
    nearest = xi_grid[int(np.argmin(np.abs(xi_grid - xi0)))]
    assert peak == pytest.approx(nearest, abs=1e-12)


def test_gaussian_wavepacket_closed_form():
    # W(x, xi) = (pi eps)^(-1) exp(-((x-x0)^2 + (xi-xi0)^2) / eps)
    eps, x0, xi0 = 0.05, 0.5, 0.3
    grid = SpatialGrid((-8.0 * np.pi,), (16.0 * np.pi,), (2048,))
    x = grid.axes()[0]
    psi = (np.pi * eps) ** (-0.25) \
        * np.exp(-(x - x0) ** 2 / (2 * eps) + 1j * xi0 * (x - x0) / eps)
    field = WaveField(grid, 0.0, eps, psi)
    xi_grid = np.linspace(xi0 - 1.0, xi0 + 1.0, 501)
    w = wigner_transform(field, x0, xi_grid, y_max=60.0)
    x_snap = w.x[0]
    closed = (1.0 / (np.pi * eps)) \
        * np.exp(-((x_snap - x0) ** 2 + (xi_grid - xi0) ** 2) / eps)
    assert np.max(np.abs(w.values - closed)) <= 1e-4 * np.max(closed)
    assert np.min(w.values) >= -1e-4 * np.max(closed)


def test_marginal_identity_is_exact_on_conjugate_grid(flagship, flagship_fields):
    field = flagship_fields[1.0 / 64]
    for x in (0.0, 0.25, -0.4):
        grid = marginal_xi_grid(field, x, y_max=300.0)
        w = wigner_transform(field, x, grid, y_max=300.0)
        dxi = grid[1] - grid[0]
        i0 = int(np.argmin(np.abs(field.grid.axes()[0] - x)))
        density = abs(field.values[i0]) ** 2
        assert np.sum(w.values) * dxi == pytest.approx(density, rel=1e-10, abs=1e-12)


def test_window_clipped():
    field, _ = _plane_wave_field()
    with pytest.raises(WindowClipped):
        wigner_transform(field, 0.0, np.linspace(-1, 1, 32), y_max=1e9)


def test_concentration_initial_state(flagship):
    eps = 1.0 / 256
    grid = flagship.grid_for(eps)
    field = wkb_initial_field(grid, eps, flagship.initial_amplitude,
                              flagship.initial_phase)
    masses = concentration_weights(field, flagship, 0.0, 0.3)
    assert len(masses) == 1
    xi_c, mass = masses[0]
    assert xi_c == pytest.approx(-np.sin(0.3), abs=1e-9)
    a2 = float(flagship.initial_amplitude.value(np.array([[0.3]]))[0] ** 2)
    assert abs(mass - a2) <= 1e-3


def test_concentration_three_branches(flagship, flagship_fields):
    eps = 1.0 / 64
    field = flagship_fields[eps]
    branches, momenta = branch_momenta(flagship, 2.0, 0.0)
    masses = concentration_weights(field, flagship, 2.0, 0.0, window_width=0.2)
    assert len(masses) == 3
    centers = np.array([c for c, _ in masses])
    np.testing.assert_allclose(np.sort(centers),
                               np.sort(momenta[:, 0]), atol=1e-9)
    np.testing.assert_allclose(np.sort(np.abs(centers)),
                               [0.0, np.sin(YSTAR), np.sin(YSTAR)], atol=1e-9)
    for (c, mass), b in zip(masses, branches):
        predicted = float(flagship.initial_amplitude.value(b.y[None, :])[0] ** 2
                          / b.J)
        assert abs(mass - predicted) / predicted <= 0.08


def test_concentration_total_mass_bounded(flagship, flagship_fields):
    field = flagship_fields[1.0 / 64]
    masses = concentration_weights(field, flagship, 2.0, 0.0)
    assert sum(m for _, m in masses) <= field.l2_norm() ** 2 + 1e-3


def test_concentration_scales_quadratically(flagship, flagship_fields):
    field = flagship_fields[1.0 / 64]
    doubled = WaveField(field.grid, field.t, field.eps, 2.0 * field.values)
    m1 = concentration_weights(field, flagship, 2.0, 0.0)
    m2 = concentration_weights(doubled, flagship, 2.0, 0.0)
    for (_, a), (_, b) in zip(m1, m2):
        assert b == pytest.approx(4.0 * a, rel=1e-12)


def test_concentration_overlapping_windows(flagship, flagship_fields):
    with pytest.raises(OverlappingBranches):
        concentration_weights(flagship_fields[1.0 / 64], flagship, 2.0, 0.0,
                              window_width=0.5)
