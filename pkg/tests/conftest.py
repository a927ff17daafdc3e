"""Shared scenario builders and session-scoped reference solves."""

import numpy as np
import pytest

from semiclassic.phase_space import harmonic_potential, zero_potential
from semiclassic.ray_map import cosine_phase, quadratic_phase
from semiclassic.reference import SpatialGrid
from semiclassic.scenario import Scenario
from semiclassic.wkb import bump_amplitude


def make_scenario(potential, phase, amplitude, box, grid, name,
                  eps_list=(1.0 / 64,), time_list=(0.5,), **kw):
    return Scenario(
        name=name,
        dimension=potential.dimension,
        potential=potential,
        initial_phase=phase,
        initial_amplitude=amplitude,
        search_box=np.atleast_2d(np.asarray(box, dtype=float)),
        grid=grid,
        eps_list=tuple(eps_list),
        time_list=tuple(time_list),
        output_dir="out",
        **kw,
    )


def flagship_scenario(**kw):
    """Free motion, S_in = cos y, bump of width 3: the main test scenario."""
    return make_scenario(
        zero_potential(),
        cosine_phase(),
        bump_amplitude([0.0], 3.0),
        [-8.0, 8.0],
        SpatialGrid((-20.0 * np.pi,), (40.0 * np.pi,), (8192,)),
        name="free-cosine",
        eps_list=(1.0 / 64, 1.0 / 128, 1.0 / 256),
        time_list=(2.0,),
        compare_window=np.array([[-0.3, 0.3]]),
        wigner_x=np.array([0.0]),
        **kw,
    )


def free_quadratic_scenario(**kw):
    """Free motion with S_in = -y^2/2; everything in closed form."""
    return make_scenario(
        zero_potential(),
        quadratic_phase([[-1.0]]),
        bump_amplitude([0.0], 2.0),
        [-6.0, 6.0],
        SpatialGrid((-16.0 * np.pi,), (32.0 * np.pi,), (8192,)),
        name="free-quadratic",
        eps_list=(1.0 / 32, 1.0 / 64),
        time_list=(0.5, 2.0),
        compare_window=np.array([[-0.2, 0.2]]),
        **kw,
    )


def harmonic_scenario(**kw):
    """Harmonic trap with zero initial phase and a narrow bump."""
    return make_scenario(
        harmonic_potential(),
        quadratic_phase([[0.0]]),
        bump_amplitude([0.0], 1.5),
        [-4.0, 4.0],
        SpatialGrid((-4.0 * np.pi,), (8.0 * np.pi,), (4096,)),
        name="harmonic",
        eps_list=(1.0 / 32, 1.0 / 64),
        time_list=(1.0,),
        compare_window=np.array([[-0.2, 0.2]]),
        **kw,
    )


@pytest.fixture(scope="session")
def flagship():
    return flagship_scenario()


@pytest.fixture(scope="session")
def flagship_fields(flagship):
    """Reference solves of the flagship scenario at t = 2, keyed by eps.

    Shared across the Wigner and acceptance tests; the three solves
    dominate the suite runtime.
    """
    from semiclassic.reference import evolve_split_step, wkb_initial_field

    fields = {}
    for eps in flagship.eps_list:
        grid = flagship.grid_for(eps)
        f0 = wkb_initial_field(grid, eps, flagship.initial_amplitude,
                               flagship.initial_phase)
        fields[eps] = evolve_split_step(flagship.potential, f0, 2.0,
                                        flagship.solver_dt(eps))
    return fields


@pytest.fixture(scope="session")
def free_quad():
    return free_quadratic_scenario()


@pytest.fixture(scope="session")
def harmonic_sc():
    return harmonic_scenario()
