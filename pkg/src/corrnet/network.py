"""Correlation networks: dense distance graph, minimum spanning tree, communities.

Nodes are addressed by integer position into ``node_ids``. Edges are stored
as ``(u, v, weight)`` with ``u < v``. Every tie is broken on the total order
``(weight, u, v)``, which makes the MST unique and identical for Prim and
Kruskal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._io import read_csv, write_csv, atomic_write_text
from .correlation import DistanceMatrix
from .errors import ConnectivityError, DegenerateError, DomainError, ParseError

ZERO_DISTANCE_WEIGHT = 1e-12
WEIGHT_MODES = ("inverse-similarity", "unweighted")
DEFAULT_RESTARTS = 4


@dataclass(frozen=True)
class WeightedGraph:
    node_ids: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]
    flagged_edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "node_ids", tuple(self.node_ids))
        norm = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        object.__setattr__(self, "edges", norm)
        object.__setattr__(self, "flagged_edges", tuple(tuple(e) for e in self.flagged_edges))
        n = len(self.node_ids)
        if len(set(self.node_ids)) != n:
            raise DomainError("node ids must be unique")
        seen = set()
        for u, v, w in norm:
            if not 0 <= u < v < n:
                raise DomainError(f"edge ({u}, {v}) must satisfy 0 <= u < v < {n}")
            if (u, v) in seen:
                raise DomainError(f"duplicate edge ({u}, {v})")
            if not (math.isfinite(w) and w > 0):
                raise DomainError(f"edge ({u}, {v}) weight must be finite and positive, got {w}")
            seen.add((u, v))

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def adjacency(self) -> np.ndarray:
        """Dense symmetric weight matrix, 0 where there is no edge."""
        A = np.zeros((self.n, self.n))
        for u, v, w in self.edges:
            A[u, v] = A[v, u] = w
        return A

    def components(self) -> list[list[int]]:
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v, _ in self.edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
        groups: dict[int, list[int]] = {}
        for x in range(self.n):
            groups.setdefault(find(x), []).append(x)
        return sorted(groups.values())


@dataclass(frozen=True)
class SpanningTree:
    node_ids: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]
    total_weight: float

    def edge_set(self) -> set[tuple[int, int]]:
        return {(u, v) for u, v, _ in self.edges}

    def as_graph(self) -> WeightedGraph:
        return WeightedGraph(self.node_ids, self.edges)


@dataclass(frozen=True)
class CommunityPartition:
    """Dense community labels ``0..k-1`` for every node.

    Labels are numbered in order of each community's first node.
    ``pass_modularity`` records the modularity after initialisation and
    after every Louvain pass.
    """

    node_ids: tuple[str, ...]
    labels: tuple[int, ...]
    modularity: float
    pass_modularity: tuple[float, ...] = ()

    @property
    def assignment(self) -> dict[str, int]:
        return dict(zip(self.node_ids, self.labels))

    @property
    def n_communities(self) -> int:
        return len(set(self.labels))

    @property
    def community_sizes(self) -> dict[int, int]:
        sizes: dict[int, int] = {}
        for c in self.labels:
            sizes[c] = sizes.get(c, 0) + 1
        return dict(sorted(sizes.items()))

    def members(self, label: int) -> list[str]:
        return [a for a, c in zip(self.node_ids, self.labels) if c == label]


def dense_graph_from_distances(d: DistanceMatrix) -> WeightedGraph:
    """Complete graph over all assets weighted by correlation distance.

    Zero distances (duplicate assets) become ``ZERO_DISTANCE_WEIGHT`` and are
    listed in ``flagged_edges``.
    """
    n = d.n
    if n < 2:
        raise DegenerateError("need at least two assets")
    iu, ju = np.triu_indices(n, k=1)
    w = d.values[iu, ju]
    zero = w <= 0
    w = np.where(zero, ZERO_DISTANCE_WEIGHT, w)
    edges = tuple(zip(iu.tolist(), ju.tolist(), w.tolist()))
    flagged = tuple(zip(iu[zero].tolist(), ju[zero].tolist()))
    return WeightedGraph(d.asset_ids, edges, flagged)


def _connectivity_error(g: WeightedGraph) -> ConnectivityError:
    comps = [[g.node_ids[i] for i in c] for c in g.components()]
    return ConnectivityError(f"graph is disconnected into {len(comps)} components: {comps}", comps)


def _tree(g: WeightedGraph, edges) -> SpanningTree:
    edges = tuple(sorted(edges, key=lambda e: (e[0], e[1])))
    return SpanningTree(g.node_ids, edges, math.fsum(w for _, _, w in edges))


def mst_prim(g: WeightedGraph) -> SpanningTree:
    """Prim's algorithm grown from node 0."""
    n = g.n
    if n == 0:
        raise DegenerateError("empty graph")
    nbrs: list[dict[int, float]] = [{} for _ in range(n)]
    for u, v, w in g.edges:
        nbrs[u][v] = w
        nbrs[v][u] = w
    inf = (math.inf, n, n)
    best = [inf] * n
    in_tree = [False] * n
    in_tree[0] = True
    for k, w in nbrs[0].items():
        best[k] = (w, 0, k)
    chosen = []
    for _ in range(n - 1):
        j = min((k for k in range(n) if not in_tree[k]), key=best.__getitem__)
        if best[j] is inf:
            raise _connectivity_error(g)
        chosen.append(best[j])
        in_tree[j] = True
        for k, w in nbrs[j].items():
            if not in_tree[k]:
                cand = (w, min(j, k), max(j, k))
                if cand < best[k]:
                    best[k] = cand
    return _tree(g, [(u, v, w) for w, u, v in chosen])


def mst_kruskal(g: WeightedGraph) -> SpanningTree:
    """Kruskal's algorithm over edges sorted by ``(weight, u, v)``."""
    n = g.n
    if n == 0:
        raise DegenerateError("empty graph")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for u, v, w in sorted(g.edges, key=lambda e: (e[2], e[0], e[1])):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            chosen.append((u, v, w))
            if len(chosen) == n - 1:
                break
    if len(chosen) != n - 1:
        raise _connectivity_error(g)
    return _tree(g, chosen)


def _labels_from(g: WeightedGraph, p) -> np.ndarray:
    if isinstance(p, CommunityPartition):
        mapping = p.assignment
    elif isinstance(p, Mapping):
        mapping = p
    else:
        return np.asarray(p, dtype=int)
    missing = [a for a in g.node_ids if a not in mapping]
    if missing:
        raise DomainError(f"nodes missing from assignment: {missing}")
    return np.array([mapping[a] for a in g.node_ids], dtype=int)


def _modularity(A: np.ndarray, labels: np.ndarray) -> float:
    k = A.sum(axis=1)
    two_m = k.sum()
    if two_m == 0:
        return 0.0
    _, comm = np.unique(labels, return_inverse=True)
    S = np.zeros((len(labels), comm.max() + 1))
    S[np.arange(len(labels)), comm] = 1.0
    sigma_in = np.einsum("ic,ij,jc->c", S, A, S)
    sigma_tot = S.T @ k
    return float(np.sum(sigma_in / two_m - (sigma_tot / two_m) ** 2))


def modularity(g: WeightedGraph, p) -> float:
    """Weighted Newman-Girvan modularity of a partition of ``g``.

    ``p`` is a :class:`CommunityPartition`, a ``node_id -> label`` mapping,
    or a label sequence aligned with ``g.node_ids``.
    """
    labels = _labels_from(g, p)
    if len(labels) != g.n:
        raise DomainError("assignment does not cover every node")
    return _modularity(g.adjacency(), labels)


def _local_moving(A: np.ndarray, rng: np.random.Generator, init: np.ndarray | None = None) -> np.ndarray:
    """Greedy single-node moves; starts from singletons or from ``init``."""
    n = len(A)
    k = A.sum(axis=1)
    two_m = k.sum()
    comm = np.arange(n) if init is None else np.array(init)
    tot = np.bincount(comm, weights=k, minlength=n)
    order = rng.permutation(n)
    moved = True
    while moved:
        moved = False
        for i in order:
            ci = comm[i]
            w_to = np.bincount(comm, weights=A[i], minlength=n)
            w_to[ci] -= A[i, i]
            tot[ci] -= k[i]
            gain = w_to - tot * k[i] / two_m
            best, best_gain = ci, gain[ci]
            for c in np.flatnonzero(w_to > 0):
                if gain[c] > best_gain + 1e-12 * max(1.0, abs(best_gain)):
                    best, best_gain = c, gain[c]
            comm[i] = best
            tot[best] += k[i]
            if best != ci:
                moved = True
    return np.unique(comm, return_inverse=True)[1]


def _aggregate(A: np.ndarray, comm: np.ndarray) -> np.ndarray:
    S = np.zeros((len(A), comm.max() + 1))
    S[np.arange(len(A)), comm] = 1.0
    return S.T @ A @ S


def _louvain_pass(A: np.ndarray, rng: np.random.Generator, start: np.ndarray) -> np.ndarray:
    """One coarsen-then-refine sweep over ``A`` starting from partition ``start``.

    Coarsening collapses ``start`` into super-nodes and repeats local moving
    plus aggregation until nothing moves. Refinement then projects the
    coarsest partition back down level by level, running local moving at
    each, so nodes stranded by an early merge can still leave.
    """
    levels = [(A, start)]  # (matrix, node -> node of the next level)
    level = _aggregate(A, start)
    while len(level) > 1:
        comm = _local_moving(level, rng)
        if comm.max() + 1 == len(level):
            break
        levels.append((level, comm))
        level = _aggregate(level, comm)
    part = np.arange(len(level))
    for lvl, to_next in reversed(levels):
        part = _local_moving(lvl, rng, part[to_next])
    return part


def _split_disconnected(A: np.ndarray, labels: np.ndarray) -> np.ndarray:
    out = np.full(len(labels), -1)
    nxt = 0
    for start in range(len(labels)):
        if out[start] >= 0:
            continue
        stack = [start]
        out[start] = nxt
        while stack:
            x = stack.pop()
            for y in np.flatnonzero(A[x] > 0):
                if out[y] < 0 and labels[y] == labels[start]:
                    out[y] = nxt
                    stack.append(y)
        nxt += 1
    return out


def _dense_labels(labels: np.ndarray) -> np.ndarray:
    remap: dict[int, int] = {}
    return np.array([remap.setdefault(int(c), len(remap)) for c in labels])


def _vertex_mover(A: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, float]:
    """Kernighan-Lin style refinement.

    A sweep moves every node exactly once, each step taking the single best
    move over all not-yet-moved nodes even when it lowers modularity (moving
    to an empty community is allowed). The best state seen during the sweep
    is kept if it beats the start; sweeps repeat until one fails to improve.
    Ties go to the lowest node, then the lowest community.
    """
    n = len(A)
    k = A.sum(axis=1)
    two_m = k.sum()
    rows = np.arange(n)
    labels = _dense_labels(labels)
    q_start = _modularity(A, labels)
    while True:
        comm = labels.copy()
        q = best_q = q_start
        best = comm
        moved = np.zeros(n, dtype=bool)
        for _ in range(n):
            H = np.zeros((n, comm.max() + 2))  # last column is an empty community
            H[rows, comm] = 1.0
            W = A @ H
            tot = k @ H
            own_w = W[rows, comm]
            own_tot = tot[comm]
            dq = 2.0 * (W - own_w[:, None]) / two_m - 2.0 * k[:, None] * (
                tot[None, :] - own_tot[:, None] + k[:, None]
            ) / two_m**2
            dq[rows, comm] = -np.inf
            dq[moved] = -np.inf
            i, c = np.unravel_index(np.argmax(dq), dq.shape)
            if not np.isfinite(dq[i, c]):
                break
            q += dq[i, c]
            comm = comm.copy()
            comm[i] = c
            comm = _dense_labels(comm)
            moved[i] = True
            if q > best_q + 1e-12:
                best, best_q = comm, q
        if best_q > q_start + 1e-12:
            labels, q_start = best, _modularity(A, best)
        else:
            return labels, q_start


def _louvain_run(A: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, list[float]]:
    node_comm = np.arange(len(A))
    q = _modularity(A, node_comm)
    history = [q]
    while True:
        candidate = _dense_labels(_louvain_pass(A, rng, node_comm))
        q_new = _modularity(A, candidate)
        if not q_new > q + 1e-12:
            candidate, q_new = _vertex_mover(A, node_comm)
            if not q_new > q + 1e-12:
                return node_comm, history
        node_comm, q = candidate, q_new
        history.append(q)


def louvain(g: WeightedGraph, seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> CommunityPartition:
    """Two-phase Louvain modularity optimisation with refinement.

    Local moving visits nodes in a seeded random order and moves each one to
    the neighbouring community with the largest strictly positive modularity
    gain until no move helps; communities are then collapsed into super-nodes
    and the process repeats on the smaller graph. After the coarsest level
    the partition is refined back down to single nodes. When a pass stops
    improving, a vertex-mover sweep tries to escape the local optimum, and
    passes resume from any improvement.

    ``restarts`` independent runs use node orders drawn from seeds spawned
    off ``seed``; the highest modularity wins, ties going to the earliest
    run. ``pass_modularity`` is the trajectory of the winning run.

    Communities that end up internally disconnected are split into their
    components, which can only raise modularity.
    """
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    A = g.adjacency()
    if A.sum() > 0:
        best = None
        for child in np.random.SeedSequence(seed).spawn(restarts):
            node_comm, history = _louvain_run(A, np.random.default_rng(child))
            if best is None or history[-1] > best[1][-1]:
                best = (node_comm, history)
        node_comm, history = best
    else:
        node_comm = np.arange(g.n)
        history = [_modularity(A, node_comm)]
    labels = _dense_labels(_split_disconnected(A, node_comm))
    q = _modularity(A, labels)
    if not np.array_equal(labels, _dense_labels(node_comm)):
        history.append(q)
    return CommunityPartition(g.node_ids, tuple(int(c) for c in labels), q, tuple(history))


def tree_weights(tree: SpanningTree, weight_mode: str = "inverse-similarity") -> WeightedGraph:
    """The tree as an affinity graph for modularity.

    ``inverse-similarity`` maps distance ``d`` to ``2 - d``; ``unweighted``
    uses 1 for every edge.
    """
    if weight_mode == "inverse-similarity":
        edges = [(u, v, max(2.0 - w, ZERO_DISTANCE_WEIGHT)) for u, v, w in tree.edges]
    elif weight_mode == "unweighted":
        edges = [(u, v, 1.0) for u, v, _ in tree.edges]
    else:
        raise DomainError(f"weight_mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")
    return WeightedGraph(tree.node_ids, edges)


def communities_of_mst(
    tree: SpanningTree, weight_mode: str = "inverse-similarity", seed: int = 0, restarts: int = DEFAULT_RESTARTS
) -> CommunityPartition:
    return louvain(tree_weights(tree, weight_mode), seed=seed, restarts=restarts)


def write_tree(tree: SpanningTree, dest) -> None:
    rows = [(tree.node_ids[u], tree.node_ids[v], w) for u, v, w in tree.edges]
    write_csv(dest, ["u", "v", "distance"], rows)


def read_tree(path, node_ids) -> SpanningTree:
    header, rows = read_csv(path)
    if header != ["u", "v", "distance"]:
        raise ParseError(f"{path}: unexpected header {header}")
    index = {a: i for i, a in enumerate(node_ids)}
    edges = []
    for u, v, w in rows:
        a, b = index[u], index[v]
        edges.append((min(a, b), max(a, b), float(w)))
    return SpanningTree(tuple(node_ids), tuple(edges), math.fsum(e[2] for e in edges))


def write_partition(p: CommunityPartition, dest) -> None:
    write_csv(dest, ["asset_id", "community"], zip(p.node_ids, p.labels))


def read_partition(path) -> dict[str, int]:
    header, rows = read_csv(path)
    if header != ["asset_id", "community"]:
        raise ParseError(f"{path}: unexpected header {header}")
    return {a: int(c) for a, c in rows}


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def tree_to_dot(tree: SpanningTree, partition: CommunityPartition | None = None, name: str = "mst") -> str:
    """Undirected DOT graph with ``community`` node and ``weight`` edge attributes."""
    labels = partition.assignment if partition is not None else {}
    lines = [f"graph {_dot_quote(name)} {{"]
    for a in tree.node_ids:
        attr = f" [community={labels[a]}]" if a in labels else ""
        lines.append(f"  {_dot_quote(a)}{attr};")
    for u, v, w in tree.edges:
        lines.append(f"  {_dot_quote(tree.node_ids[u])} -- {_dot_quote(tree.node_ids[v])} [weight={w!r}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(tree: SpanningTree, partition, path, name: str = "mst") -> None:
    atomic_write_text(path, tree_to_dot(tree, partition, name))
