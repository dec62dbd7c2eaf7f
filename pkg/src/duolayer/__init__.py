"""Distributed solution of linear systems on double-layered networks.

Clusters of agents cooperate to solve A x = b: under the row scheme every
cluster owns a band of rows and reaches consensus with the other clusters
while its agents keep a local conservation balance; under the column scheme
every cluster owns a band of columns, its agents agree among themselves, and
conservation holds globally across clusters.
"""

from .linalg import Spectrum, as_matrix, as_vector, eig, kron, rank, solve_least_squares
from .graph import (
    DisconnectedGraphError,
    Graph,
    Topology,
    build_graph,
    laplacian,
    lifted_laplacian,
)
from .partition import (
    ColumnPartition,
    Layout,
    LayoutMismatchError,
    ProblemInstance,
    RowPartition,
    TopologyMismatchError,
    partition_columns,
    partition_rows,
    selection_matrices,
)
from .dynamics import (
    DerivativePlan,
    NetworkState,
    ResidualReport,
    ShapeMismatchError,
    StateDerivative,
    agent_update_col,
    agent_update_row,
    reassembled_solution,
    residuals,
    stack_state,
    unstack_state,
)
from .spectral import (
    CompactSystem,
    InconsistentSystemError,
    SaddleBlocks,
    SpectralVerdict,
    assemble_compact,
    check_drift_spectrum,
    check_saddle_spectrum,
    equilibrium_certificate,
    kernel_offset,
    spectrum_verdict,
)
from .simulator import (
    InsufficientSamplesError,
    NonFiniteStateError,
    SimConfig,
    SimResult,
    Trajectory,
    TrajectorySample,
    auto_step_size,
    closeness_metric,
    fit_convergence_rate,
    integrate,
    random_state,
    zero_state,
)

__all__ = [
    "Spectrum",
    "as_matrix",
    "as_vector",
    "eig",
    "kron",
    "rank",
    "solve_least_squares",
    "DisconnectedGraphError",
    "Graph",
    "Topology",
    "build_graph",
    "laplacian",
    "lifted_laplacian",
    "ColumnPartition",
    "Layout",
    "LayoutMismatchError",
    "ProblemInstance",
    "RowPartition",
    "TopologyMismatchError",
    "partition_columns",
    "partition_rows",
    "selection_matrices",
    "DerivativePlan",
    "NetworkState",
    "ResidualReport",
    "ShapeMismatchError",
    "StateDerivative",
    "agent_update_col",
    "agent_update_row",
    "reassembled_solution",
    "residuals",
    "stack_state",
    "unstack_state",
    "CompactSystem",
    "InconsistentSystemError",
    "SaddleBlocks",
    "SpectralVerdict",
    "assemble_compact",
    "check_drift_spectrum",
    "check_saddle_spectrum",
    "equilibrium_certificate",
    "kernel_offset",
    "spectrum_verdict",
    "InsufficientSamplesError",
    "NonFiniteStateError",
    "SimConfig",
    "SimResult",
    "Trajectory",
    "TrajectorySample",
    "auto_step_size",
    "closeness_metric",
    "fit_convergence_rate",
    "integrate",
    "random_state",
    "zero_state",
]

__version__ = "0.1.0"
