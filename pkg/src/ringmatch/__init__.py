"""Near-isometric point-pattern matching by max-product message passing.

Find a template point set inside a larger, jittered scene by minimizing the
discrepancy of pairwise-distance matrices.  The main engine runs
max-product belief propagation on the clique chain of a squared cycle
(Theta(n m^3) per sweep); an exact junction-tree solver on a 3-tree and
brute-force enumeration oracles serve as baselines, and a benchmark
harness drives noise-grid and landmark-sequence experiments.
"""

from .bench import (
    BenchmarkRow,
    BenchmarkSpec,
    SequenceRow,
    run_benchmark,
    run_engine,
    run_sequence,
    summarize,
)
from .bp import (
    ConvergenceConfig,
    MatchResult,
    MegaNodeModel,
    MessageState,
    beliefs,
    bp_iterate,
    build_meganode_model,
    check_convergence,
    decode,
    default_mse_cutoff,
    init_messages,
    match_bp,
    run_meganode_bp,
)
from .geometry import (
    PointPattern,
    TransformInfo,
    apply_rigid_transform,
    distance_matrix,
    generate_instance,
    is_general_position,
    load_points,
    objective_residual,
)
from .junction import JunctionTree, build_junction_tree, jt_map
from .oracle import brute_force_map, brute_force_objective
from .potentials import (
    CliqueTables,
    PotentialParams,
    build_clique_tables,
    clamp,
    edge_potential,
)
from .topology import (
    CliqueChain,
    DegenerateSizeError,
    MatchGraph,
    ResourceLimitError,
    build_squared_cycle,
    build_three_tree,
    clique_chain,
    complement_edges,
    edge_ownership,
    is_chordal,
)

__version__ = "0.1.0"
