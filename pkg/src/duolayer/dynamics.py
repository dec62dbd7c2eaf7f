"""Per-agent update laws for both partition schemes.

Row scheme, agent j of cluster i (block A_ij is m_i x n_ij):

    dx_ij = -A_ij.T (A_ij x_ij - b_ij - sum_{k in N_ij} (z_ij - z_ik))
            - sum_{l in N_i} (x_ij - E_ij X_l)
    dz_ij =  A_ij x_ij - b_ij - sum_{k in N_ij} (z_ij - z_ik)

Column scheme, agent j of cluster i (block A_ij is m_ij x n_i):

    dx_ij = -A_ij.T (A_ij x_ij - b_ij - sum_{l in N_i} (z_ij - E_ij Z_l))
            - sum_{k in N_ij} (x_ij - x_ik)
    dz_ij =  A_ij x_ij - b_ij - sum_{l in N_i} (z_ij - E_ij Z_l)

N_ij are the agent's in-cluster neighbors, N_i the cluster's neighbors, X_l /
Z_l a neighboring cluster's stacked solution / coordination state (relayed by
the cluster layer, never computed on).  Self-differences vanish, so the sums
run over strict neighbors.  Every agent reads only its own block, its own
states, in-cluster neighbor states, and the stacked states of neighboring
clusters; nothing else can change its derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .graph import Topology
from .partition import ColumnPartition, RowPartition, TopologyMismatchError


class ShapeMismatchError(ValueError):
    """State shapes do not match the partition's block sizes."""


def _nested_arrays(rows) -> tuple:
    return tuple(
        tuple(np.asarray(v, dtype=float) for v in row) for row in rows
    )


@dataclass(frozen=True)
class NetworkState:
    """Per-agent solution states x[i][j] and coordination states z[i][j]."""

    x: tuple
    z: tuple
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", _nested_arrays(self.x))
        object.__setattr__(self, "z", _nested_arrays(self.z))


@dataclass(frozen=True)
class StateDerivative:
    """Time derivatives mirroring the shapes of a NetworkState."""

    dx: tuple
    dz: tuple

    def __post_init__(self):
        object.__setattr__(self, "dx", _nested_arrays(self.dx))
        object.__setattr__(self, "dz", _nested_arrays(self.dz))


def _state_sizes(part) -> tuple:
    """Per-agent (x size, z size) nested like the partition."""
    if part.scheme == "row":
        xs = part.agent_cols
        zs = tuple(
            tuple(m_i for _ in row) for m_i, row in zip(part.cluster_rows, part.agent_cols)
        )
    else:
        xs = tuple(
            tuple(n_i for _ in row) for n_i, row in zip(part.cluster_cols, part.agent_rows)
        )
        zs = part.agent_rows
    return xs, zs


def check_state_shapes(part, state: NetworkState) -> None:
    xs, zs = _state_sizes(part)
    if len(state.x) != len(xs) or len(state.z) != len(zs):
        raise ShapeMismatchError(
            f"state has {len(state.x)} clusters, partition has {len(xs)}"
        )
    for i, (xrow, zrow) in enumerate(zip(xs, zs)):
        if len(state.x[i]) != len(xrow) or len(state.z[i]) != len(zrow):
            raise ShapeMismatchError(f"cluster {i}: agent count mismatch")
        for j, (nx, nz) in enumerate(zip(xrow, zrow)):
            if state.x[i][j].shape != (nx,):
                raise ShapeMismatchError(
                    f"agent ({i},{j}): x has shape {state.x[i][j].shape}, "
                    f"expected ({nx},)"
                )
            if state.z[i][j].shape != (nz,):
                raise ShapeMismatchError(
                    f"agent ({i},{j}): z has shape {state.z[i][j].shape}, "
                    f"expected ({nz},)"
                )


def flat_slices(part) -> tuple:
    """Slices of the stacked vector [x; z] for every agent, plus dimensions.

    The x block stacks clusters in order, agents in order within a cluster;
    the z block repeats that order.  This matches the stacked drift form.
    """
    xs, zs = _state_sizes(part)
    x_slices, pos = [], 0
    for row in xs:
        cur = []
        for size in row:
            cur.append(slice(pos, pos + size))
            pos += size
        x_slices.append(tuple(cur))
    dim_x = pos
    z_slices = []
    for row in zs:
        cur = []
        for size in row:
            cur.append(slice(pos, pos + size))
            pos += size
        z_slices.append(tuple(cur))
    return tuple(x_slices), tuple(z_slices), dim_x, pos


def stack_state(part, state: NetworkState) -> np.ndarray:
    """Stack a NetworkState into the flat [x; z] layout."""
    check_state_shapes(part, state)
    x_slices, z_slices, _, dim = flat_slices(part)
    y = np.empty(dim)
    for i, row in enumerate(x_slices):
        for j, sl in enumerate(row):
            y[sl] = state.x[i][j]
    for i, row in enumerate(z_slices):
        for j, sl in enumerate(row):
            y[sl] = state.z[i][j]
    return y


def unstack_state(part, y: np.ndarray, time: float = 0.0) -> NetworkState:
    """Rebuild a NetworkState from the flat [x; z] layout."""
    x_slices, z_slices, _, dim = flat_slices(part)
    y = np.asarray(y, dtype=float)
    if y.shape != (dim,):
        raise ShapeMismatchError(f"flat state has shape {y.shape}, expected ({dim},)")
    x = [[y[sl].copy() for sl in row] for row in x_slices]
    z = [[y[sl].copy() for sl in row] for row in z_slices]
    return NetworkState(x=x, z=z, time=time)


def _unstack_derivative(part, dy: np.ndarray) -> StateDerivative:
    x_slices, z_slices, _, _ = flat_slices(part)
    dx = [[dy[sl].copy() for sl in row] for row in x_slices]
    dz = [[dy[sl].copy() for sl in row] for row in z_slices]
    return StateDerivative(dx=dx, dz=dz)


def _check_counts(part, topo: Topology) -> None:
    if part.cluster_count != topo.cluster_count:
        raise TopologyMismatchError(
            f"partition has {part.cluster_count} clusters, "
            f"topology has {topo.cluster_count}"
        )
    if part.agent_counts != topo.agent_counts:
        raise TopologyMismatchError(
            f"partition agent counts {part.agent_counts} != "
            f"topology agent counts {topo.agent_counts}"
        )


class DerivativePlan:
    """The per-agent update law precompiled for repeated evaluation.

    Both schemes give every agent the same affine map of its local inputs
    (own x, own z, the z-like neighbor inputs it differences against, and the
    x-like neighbor inputs it averages toward):

        r  = A x - b - q z + sum_k zin_k
        dx = -A.T r - p x + sum_k xin_k
        dz = r

    with q / p the respective neighbor counts.  Row scheme: zin are the
    in-cluster neighbors' coordination states and xin are this agent's bands
    of neighboring clusters' stacked states.  Column scheme: zin are this
    agent's bands of neighboring clusters' stacked coordination states and
    xin are the in-cluster neighbors' solution states.

    Each agent's map is folded into one matrix over its gathered inputs at
    build time, then scattered into a single affine operator on the flat
    state.  Columns outside an agent's inputs stay exactly zero, so nothing
    else can influence its derivative; evaluation is one matrix-vector
    product.
    """

    def __init__(self, part, topo: Topology):
        _check_counts(part, topo)
        self.part = part
        x_slices, z_slices, dim_x, dim = flat_slices(part)
        self.dim_x = dim_x
        self.dim = dim
        if part.scheme == "row":
            starts = [np.concatenate(([0], np.cumsum(row))) for row in part.agent_cols]
            seg_offsets = [row[0].start for row in x_slices]
        else:
            starts = [np.concatenate(([0], np.cumsum(row))) for row in part.agent_rows]
            seg_offsets = [row[0].start for row in z_slices]
        self.matrix = np.zeros((dim, dim))
        self.shift = np.zeros(dim)
        for i in range(part.cluster_count):
            cluster_nbrs = topo.cluster_graph.adjacent(i)
            agent_nbrs = topo.agent_graphs[i].adjacent
            for j in range(part.agent_counts[i]):
                lo = int(starts[i][j])
                hi = int(starts[i][j + 1])
                band = [
                    slice(seg_offsets[k] + lo, seg_offsets[k] + hi)
                    for k in cluster_nbrs
                ]
                if part.scheme == "row":
                    zin = [z_slices[i][k] for k in agent_nbrs(j)]
                    xin = band
                else:
                    zin = band
                    xin = [x_slices[i][k] for k in agent_nbrs(j)]
                self._fold_agent(
                    part.blocks[i][j],
                    part.offsets[i][j],
                    x_slices[i][j],
                    z_slices[i][j],
                    zin,
                    xin,
                )

    def _fold_agent(self, block, offset, sl_x, sl_z, zin, xin):
        a = np.ascontiguousarray(block)
        nz, nx = a.shape
        q = len(zin)
        p = len(xin)
        gathers = [sl_x]
        cols = [nx]
        if q:
            gathers.append(sl_z)
            cols.append(nz)
        gathers.extend(zin)
        cols.extend([nz] * q)
        gathers.extend(xin)
        cols.extend([nx] * p)
        u_dim = sum(cols)
        mat = np.zeros((nx + nz, u_dim))
        pos = 0
        mat[:nx, pos : pos + nx] = -a.T @ a - p * np.eye(nx)
        mat[nx:, pos : pos + nx] = a
        pos += nx
        if q:
            mat[:nx, pos : pos + nz] = q * a.T
            mat[nx:, pos : pos + nz] = -q * np.eye(nz)
            pos += nz
        for _ in range(q):
            mat[:nx, pos : pos + nz] = -a.T
            mat[nx:, pos : pos + nz] = np.eye(nz)
            pos += nz
        for _ in range(p):
            mat[:nx, pos : pos + nx] = np.eye(nx)
            pos += nx
        bounds = np.concatenate(([0], np.cumsum(cols)))
        for k, sl in enumerate(gathers):
            cut = mat[:, int(bounds[k]) : int(bounds[k + 1])]
            self.matrix[sl_x, sl] += cut[:nx]
            self.matrix[sl_z, sl] += cut[nx:]
        self.shift[sl_x] = a.T @ offset
        self.shift[sl_z] = -offset

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """Derivative of the flat state [x; z] under the per-agent law."""
        return self.matrix @ y + self.shift


def agent_update_row(part: RowPartition, topo: Topology, s: NetworkState) -> StateDerivative:
    """One derivative evaluation of the row-scheme update law."""
    if part.scheme != "row":
        raise ShapeMismatchError("agent_update_row needs a row partition")
    check_state_shapes(part, s)
    plan = DerivativePlan(part, topo)
    return _unstack_derivative(part, plan.evaluate(stack_state(part, s)))


def agent_update_col(part: ColumnPartition, topo: Topology, s: NetworkState) -> StateDerivative:
    """One derivative evaluation of the column-scheme update law."""
    if part.scheme != "column":
        raise ShapeMismatchError("agent_update_col needs a column partition")
    check_state_shapes(part, s)
    plan = DerivativePlan(part, topo)
    return _unstack_derivative(part, plan.evaluate(stack_state(part, s)))


def reassembled_solution(part, state: NetworkState) -> np.ndarray:
    """Collapse per-agent states into one n-vector.

    Row scheme: average of the clusters' stacked solution states.  Column
    scheme: concatenation of each cluster's agent-average.
    """
    check_state_shapes(part, state)
    if part.scheme == "row":
        stacked = [np.concatenate(state.x[i]) for i in range(part.cluster_count)]
        return reduce(np.add, stacked) / part.cluster_count
    means = [
        reduce(np.add, state.x[i]) / len(state.x[i])
        for i in range(part.cluster_count)
    ]
    return np.concatenate(means)


@dataclass(frozen=True)
class ResidualReport:
    """Constraint residuals of one network state.

    Row scheme: conservation[i] = ||sum_j (A_ij x_ij - b_ij)|| per cluster;
    consensus holds the pairwise distances between clusters' stacked states.
    Column scheme: consensus[i] = max pairwise distance inside cluster i;
    conservation is the single norm ||sum_i (A_i xbar_i - b_i)|| built from
    cluster agent-averages.  overall = ||A x - b|| for the reassembled x.
    """

    scheme: str
    conservation: tuple
    consensus: tuple
    overall: float

    @property
    def max_conservation(self) -> float:
        return max(self.conservation) if self.conservation else 0.0

    @property
    def max_consensus(self) -> float:
        return max(self.consensus) if self.consensus else 0.0


def residuals(part, topo: Topology, s: NetworkState) -> ResidualReport:
    """Conservation, consensus, and overall residual norms of a state."""
    _check_counts(part, topo)
    check_state_shapes(part, s)
    a_full, b_full = part.reassemble()
    solution = reassembled_solution(part, s)
    overall = float(np.linalg.norm(a_full @ solution - b_full))
    if part.scheme == "row":
        conservation = []
        for i in range(part.cluster_count):
            terms = [
                part.blocks[i][j] @ s.x[i][j] - part.offsets[i][j]
                for j in range(part.agent_counts[i])
            ]
            conservation.append(float(np.linalg.norm(reduce(np.add, terms))))
        stacked = [np.concatenate(s.x[i]) for i in range(part.cluster_count)]
        consensus = [
            float(np.linalg.norm(stacked[i] - stacked[k]))
            for i in range(len(stacked))
            for k in range(i + 1, len(stacked))
        ]
        return ResidualReport(
            scheme="row",
            conservation=tuple(conservation),
            consensus=tuple(consensus),
            overall=overall,
        )
    consensus = []
    for i in range(part.cluster_count):
        pair = [
            float(np.linalg.norm(s.x[i][j] - s.x[i][k]))
            for j in range(part.agent_counts[i])
            for k in range(j + 1, part.agent_counts[i])
        ]
        consensus.append(max(pair) if pair else 0.0)
    terms = []
    for i in range(part.cluster_count):
        a_i = np.vstack(part.blocks[i])
        mean_i = reduce(np.add, s.x[i]) / part.agent_counts[i]
        terms.append(a_i @ mean_i - part.cluster_share(i))
    conservation = (float(np.linalg.norm(reduce(np.add, terms))),)
    return ResidualReport(
        scheme="column",
        conservation=conservation,
        consensus=tuple(consensus),
        overall=overall,
    )
