"""Entropy-smoothed equilibria and cost design for atomic routing games."""

from .design import (
    DesignConfig,
    DesignRecord,
    DesignTrace,
    DesignVerification,
    design_loop,
    project_B,
    project_D,
    verify_design,
)
from .errors import (
    BrokenPathError,
    ExponentOverflowError,
    InfeasibleFlowError,
    NegativeCycleError,
    NotConvergedError,
    NotSymmetricError,
    NumericalError,
    RouteDesignError,
    SingularJacobianError,
    UnreachableError,
)
from .game import (
    AtomicRoutingGame,
    CostParams,
    Player,
    game_from_dict,
    game_to_dict,
    load_game_file,
    membership_D,
)
from .graph import (
    DirectedGraph,
    graph_rank_check,
    grid_graph,
    incidence_matrix,
    interior_flow,
    od_vectors,
    path_links,
    reduced_incidence,
    shortest_path_cost,
)
from .scenarios import SCENARIOS, Scenario, build_scenario, four_player_5x5, two_player_3x3
from .sensitivity import (
    DesignObjective,
    GradientPair,
    equilibrium_diag,
    implicit_gradients,
    path_to_target,
    tracking_objective,
)
from .smooth_eq import (
    EquilibriumSolution,
    HomotopySchedule,
    SmoothEqSettings,
    homotopy_solve,
    jacobian_F,
    residual_F,
    solve_nls,
)

__version__ = "0.1.0"

__all__ = [
    "AtomicRoutingGame",
    "BrokenPathError",
    "CostParams",
    "DesignConfig",
    "DesignObjective",
    "DesignRecord",
    "DesignTrace",
    "DesignVerification",
    "DirectedGraph",
    "EquilibriumSolution",
    "ExponentOverflowError",
    "GradientPair",
    "HomotopySchedule",
    "InfeasibleFlowError",
    "NegativeCycleError",
    "NotConvergedError",
    "NotSymmetricError",
    "NumericalError",
    "Player",
    "RouteDesignError",
    "SCENARIOS",
    "Scenario",
    "SingularJacobianError",
    "SmoothEqSettings",
    "UnreachableError",
    "build_scenario",
    "design_loop",
    "equilibrium_diag",
    "four_player_5x5",
    "game_from_dict",
    "game_to_dict",
    "graph_rank_check",
    "grid_graph",
    "homotopy_solve",
    "implicit_gradients",
    "incidence_matrix",
    "interior_flow",
    "jacobian_F",
    "load_game_file",
    "membership_D",
    "od_vectors",
    "path_links",
    "path_to_target",
    "project_B",
    "project_D",
    "reduced_incidence",
    "residual_F",
    "shortest_path_cost",
    "solve_nls",
    "tracking_objective",
    "two_player_3x3",
    "verify_design",
]
