"""Scenario files: the full problem statement for drivers and experiments.

A scenario bundles the potential, initial phase, initial amplitude, search
box, reference grid, epsilon and time lists plus driver settings. Scenarios
are stored as JSON (schema 1) so runs are diffable and reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .phase_space import (
    PotentialModel,
    cosine_potential,
    harmonic_potential,
    potential_consistency,
    zero_potential,
)
from .ray_map import InitialPhase, cosine_phase, phase_consistency, quadratic_phase
from .reference import SpatialGrid
from .wkb import InitialAmplitude, bump_amplitude, gaussian_amplitude

SCHEMA_VERSION = 1
CONSISTENCY_SEED = 20240716
CONSISTENCY_RTOL = 1e-5


@dataclass(frozen=True)
class Scenario:
    """Validated problem statement shared by all drivers."""

    name: str
    dimension: int
    potential: PotentialModel
    initial_phase: InitialPhase
    initial_amplitude: InitialAmplitude
    search_box: np.ndarray
    grid: SpatialGrid
    eps_list: tuple
    time_list: tuple
    output_dir: str
    compare_window: np.ndarray | None = None
    dt_base: float = 1e-4
    flow_dt: float = 1e-3
    grid_density: int = 64
    maslov_method: str = "crossings"
    wigner_x: np.ndarray | None = None
    wigner_window_width: float = 0.2
    caustic_map: dict | None = None
    raw: dict = field(default_factory=dict)

    def solver_dt(self, eps: float) -> float:
        """Reference-solver step, scaled down with eps from the largest one."""
        return self.dt_base * eps / max(self.eps_list)

    def momentum_bound(self) -> float:
        """Upper estimate of |grad S| carried by the evolved field.

        Launch momenta over the amplitude support plus the energy headroom
        the potential can convert into momentum inside the search box.
        """
        pts_support = _dense_box_grid(self.initial_amplitude.support)
        pts_box = _dense_box_grid(self.search_box)
        g2 = np.sum(self.initial_phase.gradient(pts_support) ** 2, axis=-1)
        v0 = self.potential.value(pts_support)
        v_min = float(np.min(self.potential.value(pts_box)))
        xi2 = np.max(g2 + 2.0 * np.maximum(v0 - v_min, 0.0))
        return float(np.sqrt(max(xi2, 0.0)))

    def grid_for(self, eps: float) -> SpatialGrid:
        """Reference grid refined until dx < eps / max|grad S|."""
        return self.grid.refined_for(eps, self.momentum_bound())

    def hash(self) -> str:
        payload = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _sample_box(box, rng, count):
    box = np.atleast_2d(np.asarray(box, dtype=float))
    return rng.uniform(box[:, 0], box[:, 1], size=(count, box.shape[0]))


def _dense_box_grid(box, per_axis: int = 2049):
    box = np.atleast_2d(np.asarray(box, dtype=float))
    n = box.shape[0]
    per_axis = per_axis if n == 1 else 65
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _require(cond, message):
    if not cond:
        raise ScenarioError(message)


def _build_potential(spec, dimension):
    kind = spec.get("type")
    if kind == "zero":
        return zero_potential(dimension)
    if kind == "harmonic":
        return harmonic_potential(float(spec.get("omega", 1.0)), dimension)
    if kind == "cosine":
        return cosine_potential(float(spec.get("v0", 1.0)),
                                float(spec.get("wavenumber", 1.0)), dimension)
    raise ScenarioError(f"unknown potential type {kind!r}")


def _build_phase(spec, dimension):
    kind = spec.get("type")
    if kind == "quadratic":
        matrix = np.asarray(spec["matrix"], dtype=float)
        _require(matrix.shape == (dimension, dimension),
                 "quadratic phase matrix shape must match the dimension")
        try:
            return quadratic_phase(matrix)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
    if kind == "cosine":
        return cosine_phase(float(spec.get("amplitude", 1.0)),
                            float(spec.get("wavenumber", 1.0)), dimension)
    raise ScenarioError(f"unknown initial phase type {kind!r}")


def _build_amplitude(spec, dimension):
    kind = spec.get("type")
    if kind == "bump":
        return bump_amplitude(spec["center"], float(spec["width"]),
                              dimension=dimension)
    if kind == "gaussian":
        return gaussian_amplitude(spec["center"], float(spec["sigma"]),
                                  truncation_radius=float(
                                      spec.get("truncation_radius", 8.0)),
                                  dimension=dimension)
    raise ScenarioError(f"unknown initial amplitude type {kind!r}")


def scenario_from_dict(data: dict) -> Scenario:
    """Build and validate a Scenario from parsed JSON."""
    _require(isinstance(data, dict), "scenario must be a JSON object")
    _require(data.get("schema") == SCHEMA_VERSION,
             f"unsupported schema {data.get('schema')!r}; expected {SCHEMA_VERSION}")
    for key in ("name", "dimension", "potential", "initial_phase",
                "initial_amplitude", "search_box", "grid", "eps_list",
                "time_list", "output_dir"):
        _require(key in data, f"scenario is missing required key {key!r}")

    dimension = int(data["dimension"])
    _require(dimension >= 1, "dimension must be at least 1")

    potential = _build_potential(data["potential"], dimension)
    phase = _build_phase(data["initial_phase"], dimension)
    amplitude = _build_amplitude(data["initial_amplitude"], dimension)

    box = np.atleast_2d(np.asarray(data["search_box"], dtype=float))
    _require(box.shape == (dimension, 2) and np.all(box[:, 0] < box[:, 1]),
             "search_box must be [lo, hi] per axis with lo < hi")

    gspec = data["grid"]
    try:
        grid = SpatialGrid(left=tuple(np.atleast_1d(gspec["left"])),
                           length=tuple(np.atleast_1d(gspec["length"])),
                           nodes=tuple(np.atleast_1d(gspec["nodes"])))
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"invalid grid: {exc}") from exc

    eps_list = tuple(float(e) for e in data["eps_list"])
    _require(all(e > 0.0 for e in eps_list), "eps values must be positive")
    _require(len(set(eps_list)) == len(eps_list), "eps values must be distinct")
    _require(len(eps_list) > 0, "eps_list must not be empty")

    time_list = tuple(float(t) for t in data["time_list"])
    _require(all(t >= 0.0 for t in time_list), "times must be >= 0")

    window = None
    if "compare_window" in data:
        w = data["compare_window"]
        window = np.stack([np.atleast_1d(np.asarray(w["min"], dtype=float)),
                           np.atleast_1d(np.asarray(w["max"], dtype=float))],
                          axis=-1)
        _require(window.shape == (dimension, 2)
                 and np.all(window[:, 0] < window[:, 1]),
                 "compare_window must give min < max per axis")

    wigner_x = None
    wigner_width = 0.2
    if "wigner" in data:
        wigner_x = np.atleast_1d(np.asarray(data["wigner"]["x"], dtype=float))
        _require(wigner_x.shape == (dimension,),
                 "wigner.x must be a point of the scenario dimension")
        wigner_width = float(data["wigner"].get("window_width", 0.2))

    cmap = data.get("caustic_map")
    if cmap is not None:
        _require({"t_range", "x_range", "resolution"} <= set(cmap),
                 "caustic_map needs t_range, x_range and resolution")

    maslov_method = data.get("maslov_method", "crossings")
    _require(maslov_method in ("crossings", "free"),
             "maslov_method must be 'crossings' or 'free'")
    if maslov_method == "free":
        _require(potential.is_zero,
                 "the eigenvalue Maslov formula only applies to zero potential")

    scenario = Scenario(
        name=str(data["name"]),
        dimension=dimension,
        potential=potential,
        initial_phase=phase,
        initial_amplitude=amplitude,
        search_box=box,
        grid=grid,
        eps_list=eps_list,
        time_list=time_list,
        output_dir=str(data["output_dir"]),
        compare_window=window,
        dt_base=float(data.get("dt_base", 1e-4)),
        flow_dt=float(data.get("flow_dt", 1e-3)),
        grid_density=int(data.get("grid_density", 64)),
        maslov_method=maslov_method,
        wigner_x=wigner_x,
        wigner_window_width=wigner_width,
        caustic_map=cmap,
        raw=data,
    )
    _validate_derivatives(scenario)
    return scenario


def _validate_derivatives(scenario: Scenario) -> None:
    rng = np.random.default_rng(CONSISTENCY_SEED)
    pts = _sample_box(scenario.search_box, rng, 32)
    g_err, h_err = potential_consistency(scenario.potential, pts)
    _require(max(g_err, h_err) <= CONSISTENCY_RTOL,
             f"potential derivatives inconsistent (errors {g_err:.2e}, {h_err:.2e})")
    g_err, h_err = phase_consistency(scenario.initial_phase, pts)
    _require(max(g_err, h_err) <= CONSISTENCY_RTOL,
             f"initial phase derivatives inconsistent (errors {g_err:.2e}, {h_err:.2e})")


def load_scenario(path) -> Scenario:
    """Read and validate a scenario JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(data)
