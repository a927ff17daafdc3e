"""Semiclassical Schrodinger toolkit.

Builds the ray-traced small-eps approximation of the wave field (classical
trajectories, actions, caustics, Maslov phase shifts) and verifies it at
desk scale against a split-step spectral solver of the eps-scaled
Schrodinger equation.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BoundaryContamination,
    BranchJump,
    CausticInWindow,
    CausticProximity,
    NonFinite,
    NonTransversalCrossing,
    NoRoot,
    NotCommuting,
    OnCaustic,
    OverlappingBranches,
    ScenarioError,
    SemiclassicError,
    UnderResolved,
    WindowClipped,
)
from .phase_space import (  # noqa: F401
    FlowState,
    PhasePoint,
    PotentialModel,
    cosine_potential,
    flow,
    flow_batch,
    hamiltonian,
    harmonic_potential,
    zero_potential,
)
# the ray_map *function* stays namespaced (semiclassic.ray_map.ray_map);
# re-exporting it would shadow the submodule attribute of the same name
from .ray_map import (  # noqa: F401
    Branch,
    InitialPhase,
    RayMapValue,
    caustic_times,
    cosine_phase,
    find_branches,
    quadratic_phase,
    refine_branch,
)
from .maslov import (  # noqa: F401
    MaslovReport,
    det_block_commuting,
    maslov_crossings,
    maslov_free,
)
from .wkb import (  # noqa: F401
    BranchContribution,
    InitialAmplitude,
    branch_phase,
    bump_amplitude,
    eikonal_residual,
    gaussian_amplitude,
    wkb_contributions,
    wkb_value,
)
from .reference import (  # noqa: F401
    SpatialGrid,
    WaveField,
    evolve_split_step,
    free_quadrature,
    load_wavefield_csv,
    save_wavefield_csv,
    wkb_initial_field,
)
from .wigner import (  # noqa: F401
    WignerSlice,
    concentration_weights,
    marginal_xi_grid,
    wigner_transform,
)
from .scenario import Scenario, load_scenario, scenario_from_dict  # noqa: F401
