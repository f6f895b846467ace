"""Clustered network model and connectivity predicates.

Edge convention: an edge ``(j, i, w)`` means agent ``i`` reads agent ``j``
with weight ``w``, i.e. ``a_ij = w`` in the adjacency matrix and
``L_ij = -w`` in the Laplacian.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import embed_leader_matrix

STOCHASTIC_TOL = 1e-12


class ModelError(ValueError):
    """Structural inconsistency in a network description."""


@dataclass(frozen=True)
class DirectedWeightedGraph:
    node_count: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.node_count < 0:
            raise ModelError("node_count must be nonnegative")
        edges = tuple((int(a), int(b), float(w)) for a, b, w in self.edges)
        for src, dst, w in edges:
            if not (0 <= src < self.node_count and 0 <= dst < self.node_count):
                raise ModelError(f"edge {src}->{dst} has a node id out of range")
            if src == dst:
                raise ModelError(f"self-loop on node {src}")
            if not w > 0 or not np.isfinite(w):
                raise ModelError(f"edge {src}->{dst} has non-positive weight {w}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_adjacency(cls, adj, threshold: float = 0.0) -> "DirectedWeightedGraph":
        adj = np.asarray(adj, dtype=float)
        n = adj.shape[0]
        edges = [(j, i, adj[i, j]) for i in range(n) for j in range(n) if i != j and adj[i, j] > threshold]
        return cls(n, tuple(edges))

    @classmethod
    def from_laplacian(cls, lap) -> "DirectedWeightedGraph":
        lap = np.asarray(lap, dtype=float)
        adj = -lap.copy()
        np.fill_diagonal(adj, 0.0)
        if np.any(adj < 0):
            raise ModelError("Laplacian has positive off-diagonal entries")
        return cls.from_adjacency(adj)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for src, dst, w in self.edges:
            a[dst, src] += w
        return a

    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for src, dst, _ in self.edges:
            out[src].append(dst)
        return out

    def reversed(self) -> "DirectedWeightedGraph":
        return DirectedWeightedGraph(self.node_count, tuple((b, a, w) for a, b, w in self.edges))

    def subgraph(self, nodes: Sequence[int]) -> "DirectedWeightedGraph":
        """Induced subgraph, relabelled ``0..len(nodes)-1`` in the given order."""
        index = {v: k for k, v in enumerate(nodes)}
        edges = [(index[a], index[b], w) for a, b, w in self.edges if a in index and b in index]
        return DirectedWeightedGraph(len(nodes), tuple(edges))


def _reachable(succ: list[list[int]], root: int) -> set[int]:
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def has_directed_spanning_tree(g: DirectedWeightedGraph) -> bool:
    """True iff some node reaches every node along edge direction."""
    if g.node_count == 0:
        return False
    succ = g.successors()
    return any(len(_reachable(succ, r)) == g.node_count for r in range(g.node_count))


def spanning_tree_roots(g: DirectedWeightedGraph) -> list[int]:
    succ = g.successors()
    return [r for r in range(g.node_count) if len(_reachable(succ, r)) == g.node_count]


def is_strongly_connected(g: DirectedWeightedGraph) -> bool:
    if g.node_count == 0:
        return False
    forward = _reachable(g.successors(), 0)
    backward = _reachable(g.reversed().successors(), 0)
    return len(forward) == g.node_count and len(backward) == g.node_count


def matrix_graph(m, threshold: float = 1e-12) -> DirectedWeightedGraph:
    """Graph associated with a nonnegative matrix: edge ``j -> i`` iff ``m[i, j] > threshold``."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(m < -threshold):
        raise ValueError(f"matrix has entries below -{threshold}")
    return DirectedWeightedGraph.from_adjacency(m, threshold)


@dataclass(frozen=True)
class SiaCheck:
    ok: bool
    reason: str

    def __bool__(self):
        return self.ok


def is_sia(m, tol: float = STOCHASTIC_TOL) -> SiaCheck:
    """Sufficient SIA test: stochastic, positive diagonal, spanning tree in the associated graph."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return SiaCheck(False, "not square")
    if np.any(m < -tol) or np.any(np.abs(m.sum(axis=1) - 1.0) > tol):
        return SiaCheck(False, "not row-stochastic")
    if np.any(np.diag(m) <= 0):
        return SiaCheck(False, "diagonal has non-positive entries")
    if not has_directed_spanning_tree(matrix_graph(m, threshold=tol)):
        return SiaCheck(False, "associated graph has no directed spanning tree")
    return SiaCheck(True, "stochastic, positive diagonal, spanning tree")


@dataclass(frozen=True)
class ClusterPartition:
    clusters: tuple[tuple[int, ...], ...]
    leaders: tuple[int, ...]

    def __post_init__(self):
        clusters = tuple(tuple(int(v) for v in c) for c in self.clusters)
        leaders = tuple(int(v) for v in self.leaders)
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "leaders", leaders)
        if not clusters:
            raise ModelError("at least one cluster is required")
        if len(leaders) != len(clusters):
            raise ModelError("exactly one leader per cluster is required")
        nodes = [v for c in clusters for v in c]
        if any(len(c) == 0 for c in clusters):
            raise ModelError("clusters must be nonempty")
        if len(set(nodes)) != len(nodes):
            raise ModelError("clusters overlap")
        if sorted(nodes) != list(range(len(nodes))):
            raise ModelError("clusters must cover agents 0..N-1 exactly")
        for tau, (c, lead) in enumerate(zip(clusters, leaders)):
            if lead not in c:
                raise ModelError(f"leader {lead} is not in cluster {tau}")

    @property
    def size(self) -> int:
        return sum(len(c) for c in self.clusters)

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    def cluster_of(self) -> list[int]:
        owner = [0] * self.size
        for tau, c in enumerate(self.clusters):
            for v in c:
                owner[v] = tau
        return owner

    def indicator_matrix(self) -> np.ndarray:
        """N x m matrix whose column tau is the indicator of cluster tau."""
        e = np.zeros((self.size, self.cluster_count))
        for tau, c in enumerate(self.clusters):
            e[list(c), tau] = 1.0
        return e


@dataclass(frozen=True, eq=False)
class ClusteredNetwork:
    intra: DirectedWeightedGraph
    partition: ClusterPartition
    p_e: np.ndarray = field(repr=False)

    def __post_init__(self):
        p_e = np.array(self.p_e, dtype=float)
        p_e.setflags(write=False)
        object.__setattr__(self, "p_e", p_e)
        n = self.partition.size
        if self.intra.node_count != n:
            raise ModelError(f"graph has {self.intra.node_count} nodes, partition covers {n}")
        if p_e.shape != (n, n):
            raise ModelError(f"p_e must be {n}x{n}, got {p_e.shape}")
        if not np.all(np.isfinite(p_e)):
            raise ModelError("p_e has non-finite entries")
        owner = self.partition.cluster_of()
        for src, dst, _ in self.intra.edges:
            if owner[src] != owner[dst]:
                raise ModelError(f"continuous edge {src}->{dst} crosses clusters")

    @property
    def size(self) -> int:
        return self.partition.size

    @property
    def cluster_count(self) -> int:
        return self.partition.cluster_count

    @classmethod
    def from_laplacians(cls, blocks: Sequence, leaders: Sequence[int], p_e=None, p_l=None) -> "ClusteredNetwork":
        """Build from per-cluster Laplacian blocks laid out consecutively.

        ``leaders`` are global agent indices. Give either ``p_e`` or the
        leader matrix ``p_l``; the latter is embedded with identity rows for
        the followers.
        """
        edges = []
        clusters = []
        offset = 0
        for block in blocks:
            g = DirectedWeightedGraph.from_laplacian(block)
            edges.extend((a + offset, b + offset, w) for a, b, w in g.edges)
            clusters.append(tuple(range(offset, offset + g.node_count)))
            offset += g.node_count
        partition = ClusterPartition(tuple(clusters), tuple(leaders))
        if (p_e is None) == (p_l is None):
            raise ModelError("give exactly one of p_e and p_l")
        if p_e is None:
            p_e = embed_leader_matrix(p_l, partition.leaders, offset)
        return cls(DirectedWeightedGraph(offset, tuple(edges)), partition, p_e)


def build_laplacian(network: ClusteredNetwork | DirectedWeightedGraph) -> np.ndarray:
    """Laplacian with the diagonal set to the negated off-diagonal row sum (exact zero row sums)."""
    g = network.intra if isinstance(network, ClusteredNetwork) else network
    if isinstance(network, ClusteredNetwork):
        owner = network.partition.cluster_of()
        for src, dst, _ in g.edges:
            if owner[src] != owner[dst]:
                raise ModelError(f"edge {src}->{dst} crosses clusters")
    lap = -g.adjacency()
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def inter_cluster_graph(network: ClusteredNetwork, threshold: float = 1e-12) -> DirectedWeightedGraph:
    """All intra-cluster edges together with the off-diagonal support of ``p_e``."""
    jumps = matrix_graph(np.clip(network.p_e, 0.0, None), threshold)
    return DirectedWeightedGraph(network.size, network.intra.edges + jumps.edges)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks]}


def validate_network(network: ClusteredNetwork, tol: float = STOCHASTIC_TOL) -> ValidationReport:
    checks = []
    p_e = network.p_e
    part = network.partition

    missing = [tau for tau, c in enumerate(part.clusters)
               if not has_directed_spanning_tree(network.intra.subgraph(c))]
    checks.append(Check("cluster_spanning_trees", not missing,
                        f"clusters without a directed spanning tree: {missing}" if missing
                        else f"all {part.cluster_count} clusters have a directed spanning tree"))

    row_err = np.abs(p_e.sum(axis=1) - 1.0)
    negative = np.argwhere(p_e < -tol)
    bad_rows = [int(i) for i in np.flatnonzero(row_err > tol)]
    stochastic = not bad_rows and negative.size == 0
    detail = "row sums are 1 and entries nonnegative"
    if not stochastic:
        detail = f"rows with sum != 1: {bad_rows}; negative entries: {negative.tolist()}"
    checks.append(Check("p_e_row_stochastic", stochastic, detail))

    diag_bad = [int(i) for i in np.flatnonzero(np.diag(p_e) <= 0)]
    checks.append(Check("p_e_positive_diagonal", not diag_bad,
                        f"non-positive diagonal at rows {diag_bad}" if diag_bad else "diagonal positive"))

    leaders = set(part.leaders)
    eye = np.eye(network.size)
    not_identity = [i for i in range(network.size)
                    if i not in leaders and np.max(np.abs(p_e[i] - eye[i])) > tol]
    checks.append(Check("follower_identity_rows", not not_identity,
                        f"follower rows that jump: {not_identity}" if not_identity
                        else "follower rows are identity rows"))

    strongly = is_strongly_connected(inter_cluster_graph(network))
    checks.append(Check("inter_cluster_strongly_connected", strongly,
                        "intra edges plus p_e support form a strongly connected graph" if strongly
                        else "intra edges plus p_e support are not strongly connected"))
    return ValidationReport(tuple(checks))
