"""Back-off rates for ideal CSMA networks from clique-based free energy
approximations, with a brute-force oracle and an event-driven simulator to
validate them."""

from .exceptions import (
    ConvergenceError,
    InfeasibleTargetError,
    NotChordalError,
    StateSpaceCapError,
)
from .graphs import (
    CliqueTree,
    ConflictGraph,
    clique_tree,
    count_containing_cliques,
    enumerate_cliques,
    graph_from_json,
    graph_to_json,
    is_chordal,
    load_graph,
    maximal_cliques,
    random_chordal_graph,
    random_geometric_graph,
    save_graph,
)
from .free_energy import (
    BackoffRates,
    Region,
    RegionSet,
    backoff_from_regions,
    bethe_rates,
    build_kikuchi_regions,
    build_kmax_regions,
    clique_belief_free_energy,
    counting_number,
    ibp_fixed_point_check,
    kmax_rates_recursive,
    kmax_rates_sweep,
    message_ratios,
    triangle_rates,
    verify_kikuchi_equivalence,
)
from .chordal import (
    ChordalSolution,
    chordal_region_set,
    exact_rates_chordal,
    gibbs_entropy_chordal,
    stationary_probability_chordal,
    verify_chordal_kikuchi_identity,
)
from .oracle import (
    FeasibilityResult,
    StateSpace,
    enumerate_independent_sets,
    feasibility_check,
    forward_throughputs,
    inverse_rates_bruteforce,
)
from .simulator import SimConfig, SimResult, mean_relative_error, simulate

__version__ = "0.1.0"
