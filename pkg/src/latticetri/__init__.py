"""latticetri: lambda-weighted lattice triangulations of m x n grids.

Library + CLI for sampling (heat-bath flip dynamics), exhaustive small
instance enumeration, ground-state construction, flip distances, influence
regions, exact Gibbs/mixing computations and bottleneck analysis.
"""

from .geometry import (
    Edge,
    EdgeOrientation,
    GridSpec,
    LatticePoint,
    Midpoint,
    MidpointKind,
    MinimalParallelogram,
    Slope,
    closest_points,
    edge_at,
    edges_cross,
    excluded_region_contains,
    midpoints,
    minimal_parallelogram,
    orientation,
)
from .triangulation import (
    ConstraintSet,
    FlipProposal,
    GroundStateResult,
    StaleProposalError,
    Triangulation,
    ValidationError,
    apply_flip,
    candidate_configs,
    complete,
    flippable,
    ground_state,
    heat_bath_prob,
    is_spanned,
    validate_constraints,
)
from .flipgraph import (
    EnumerationCapExceeded,
    FlipGraph,
    StateSpace,
    bfs_distance,
    build_flip_graph,
    edge_tree,
    enumerate_triangulations,
    flip_distance,
    kappa,
)
from .structure import (
    INFINITE_DISTANCE,
    BTriangleDecomposition,
    InfluenceRegion,
    LatticePath,
    classify,
    distance_d,
    influence_region_branching,
    influence_region_minimal,
    path_from_1d,
    path_to_1d,
    phi_x,
)
from .gibbs import (
    ExactDistribution,
    GibbsParams,
    MidpointPolicy,
    MixingReport,
    TransitionMatrix,
    conditional,
    conductance_ratio,
    exact_distribution,
    herringbone_set,
    mixing_time_exact,
    set_inclusion_prob,
    tail_laws,
    transition_matrix,
    tv_marginal,
)
from .sampler import (
    ChainState,
    CoupledPair,
    CouplingReport,
    RunResult,
    coalescence_time,
    coupled_step,
    hitting_time_experiment,
    path_coupling_check,
    path_coupling_check_1d,
    run,
    step,
)
from .io import load_constraints, load_snapshot, save_constraints, save_snapshot
from .render import Overlays, render_svg

__version__ = "0.1.0"
