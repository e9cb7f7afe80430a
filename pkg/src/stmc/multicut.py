"""Minimum-cost multicut: exact enumeration oracle and a contraction heuristic.

Clustering a weighted graph so the total weight of edges between clusters
is minimal. Positive weights pull nodes together, negative weights push
them apart; absent pairs carry implicit weight zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EXACT_NODE_LIMIT = 12
_GAIN_EPS = 1e-12


@dataclass
class WeightedGraph:
    """Undirected graph with at most one weighted edge per node pair."""

    n: int
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen = set()
        for u, v, w in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside node range 0..{self.n - 1}")
            if u > v:
                raise ValueError(f"edge ({u}, {v}) must be stored with u < v")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            if not np.isfinite(w):
                raise ValueError(f"edge ({u}, {v}) has non-finite weight {w}")
            seen.add((u, v))

    @classmethod
    def from_matrix(cls, weights: np.ndarray) -> WeightedGraph:
        """Build from a symmetric matrix; zero entries stay implicit."""
        weights = np.asarray(weights, dtype=float)
        n = weights.shape[0]
        edges = [
            (u, v, float(weights[u, v]))
            for u in range(n)
            for v in range(u + 1, n)
            if weights[u, v] != 0.0
        ]
        return cls(n=n, edges=edges)


def canonical_labels(labels: list[int] | np.ndarray) -> list[int]:
    """Relabel clusters densely from 0 in order of first appearance."""
    mapping: dict[int, int] = {}
    out = []
    for label in labels:
        label = int(label)
        if label not in mapping:
            mapping[label] = len(mapping)
        out.append(mapping[label])
    return out


def clusters_of(labels: list[int]) -> list[set[int]]:
    """Disjoint node sets covering the graph, ordered by smallest member."""
    groups: dict[int, set[int]] = {}
    for node, label in enumerate(labels):
        groups.setdefault(int(label), set()).add(node)
    return sorted(groups.values(), key=min)


def cut_cost(graph: WeightedGraph, labels: list[int]) -> float:
    """Total weight of edges whose endpoints are in different clusters."""
    if len(labels) != graph.n:
        raise ValueError(f"expected {graph.n} labels, got {len(labels)}")
    return float(sum(w for u, v, w in graph.edges if labels[u] != labels[v]))


def _iter_partitions(n: int):
    """Yield every set partition of range(n) as a restricted growth string.

    The first label is always 0 and each new label is at most one above the
    running maximum, so every partition appears exactly once, densely
    labeled, starting from the single-cluster string.
    """
    labels = [0] * n
    prefix_max = [0] * n
    while True:
        yield labels
        i = n - 1
        while i > 0 and labels[i] > prefix_max[i - 1]:
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        prefix_max[i] = max(prefix_max[i - 1], labels[i])
        for j in range(i + 1, n):
            labels[j] = 0
            prefix_max[j] = prefix_max[i]


def solve_exact(graph: WeightedGraph) -> list[int]:
    """Minimum-cost partition by full enumeration; intended as an oracle.

    Deterministic: the first partition reaching the minimal cost in
    canonical enumeration order wins. Bounded to small n because the
    number of partitions follows the Bell numbers.
    """
    if graph.n > _EXACT_NODE_LIMIT:
        raise ValueError(f"exact solver is limited to n <= {_EXACT_NODE_LIMIT}, got {graph.n}")
    if graph.n == 0:
        return []
    best_cost = float("inf")
    best: list[int] = list(range(graph.n))
    edges = graph.edges
    for labels in _iter_partitions(graph.n):
        cost = 0.0
        for u, v, w in edges:
            if labels[u] != labels[v]:
                cost += w
        if cost < best_cost:
            best_cost = cost
            best = labels.copy()
    return best


def _greedy_contraction(graph: WeightedGraph) -> list[int]:
    """Repeatedly contract the strongest positive connection between clusters.

    Clusters are keyed by their smallest member; parallel edges created by a
    contraction sum their weights. Stops when no inter-cluster sum is
    positive, which bounds the final cut cost by zero.
    """
    adjacency: dict[int, dict[int, float]] = {i: {} for i in range(graph.n)}
    for u, v, w in graph.edges:
        adjacency[u][v] = w
        adjacency[v][u] = w
    members: dict[int, list[int]] = {i: [i] for i in range(graph.n)}
    while True:
        best_w = 0.0
        best_pair: tuple[int, int] | None = None
        for u in sorted(adjacency):
            for v in sorted(adjacency[u]):
                if v <= u:
                    continue
                w = adjacency[u][v]
                if w > best_w:
                    best_w = w
                    best_pair = (u, v)
        if best_pair is None:
            break
        u, v = best_pair
        for x, w in adjacency[v].items():
            if x == u:
                continue
            merged = adjacency[u].get(x, 0.0) + w
            adjacency[u][x] = merged
            adjacency[x][u] = merged
            del adjacency[x][v]
        del adjacency[u][v]
        del adjacency[v]
        members[u].extend(members[v])
        del members[v]
    labels = [0] * graph.n
    for rep, nodes in members.items():
        for node in nodes:
            labels[node] = rep
    return canonical_labels(labels)


def _kl_pass(node_adj: list[list[tuple[int, float]]], labels: list[int]) -> bool:
    """One Kernighan-Lin pass over single-node moves; commits the best prefix.

    Chains tentative relabelings: each step applies the globally best move
    among not-yet-moved nodes even when its own gain is negative, tracking
    the cumulative gain. Afterwards the prefix with the highest cumulative
    gain is kept, which lets the search climb out of basins where every
    individual move looks bad. Mutates ``labels`` and returns True only when
    the committed prefix strictly improves the cut cost.
    """
    n = len(labels)
    work = list(labels)
    sizes: dict[int, int] = {}
    for label in work:
        sizes[label] = sizes.get(label, 0) + 1
    fresh = max(work) + 1
    locked = [False] * n
    history: list[tuple[int, int]] = []
    gains: list[float] = []
    cumulative = 0.0
    for _ in range(n):
        best_gain = -float("inf")
        best_node = -1
        best_target = -1
        for node in range(n):
            if locked[node]:
                continue
            current = work[node]
            pull: dict[int, float] = {}
            for other, w in node_adj[node]:
                label = work[other]
                pull[label] = pull.get(label, 0.0) + w
            own = pull.get(current, 0.0)
            for label in sorted(pull):
                if label == current:
                    continue
                gain = pull[label] - own
                if gain > best_gain:
                    best_gain, best_node, best_target = gain, node, label
            if sizes[current] > 1 and -own > best_gain:
                best_gain, best_node, best_target = -own, node, fresh
        if best_node < 0:
            break
        old = work[best_node]
        work[best_node] = best_target
        sizes[old] -= 1
        sizes[best_target] = sizes.get(best_target, 0) + 1
        if best_target == fresh:
            fresh += 1
        locked[best_node] = True
        cumulative += best_gain
        history.append((best_node, best_target))
        gains.append(cumulative)
    best_prefix = -1
    best_value = _GAIN_EPS
    for i, value in enumerate(gains):
        if value > best_value:
            best_value = value
            best_prefix = i
    if best_prefix < 0:
        return False
    for node, target in history[: best_prefix + 1]:
        labels[node] = target
    return True


def _join_clusters(graph: WeightedGraph, labels: list[int]) -> bool:
    """Merge cluster pairs connected by a positive total weight.

    A partition can only be optimal when every inter-cluster weight sum is
    nonpositive, so each merge is a guaranteed improvement. Always merges
    the strongest pair first; mutates ``labels`` and reports whether any
    merge happened.
    """
    changed = False
    while True:
        sums: dict[tuple[int, int], float] = {}
        for u, v, w in graph.edges:
            a, b = labels[u], labels[v]
            if a != b:
                key = (a, b) if a < b else (b, a)
                sums[key] = sums.get(key, 0.0) + w
        best_pair: tuple[int, int] | None = None
        best_sum = _GAIN_EPS
        for pair in sorted(sums):
            if sums[pair] > best_sum:
                best_sum = sums[pair]
                best_pair = pair
        if best_pair is None:
            return changed
        keep, drop = best_pair
        for node, label in enumerate(labels):
            if label == drop:
                labels[node] = keep
        changed = True


def solve_heuristic(graph: WeightedGraph, max_rounds: int = 0) -> list[int]:
    """Greedy contraction refined by node-move and cluster-join rounds.

    Each round runs one Kernighan-Lin pass followed by positive-sum cluster
    joins; the loop stops at the first round that changes nothing. Every
    committed change strictly lowers the cut cost, so the refinement
    terminates, stays deterministic (ties break toward lower indices), and
    is never worse than all-singletons or a single cluster. ``max_rounds``
    caps the refinement when positive; zero means run to convergence.
    """
    if graph.n == 0:
        return []
    node_adj: list[list[tuple[int, float]]] = [[] for _ in range(graph.n)]
    for u, v, w in graph.edges:
        node_adj[u].append((v, w))
        node_adj[v].append((u, w))
    labels = _greedy_contraction(graph)
    rounds = 0
    while True:
        moved = _kl_pass(node_adj, labels)
        joined = _join_clusters(graph, labels)
        rounds += 1
        if not (moved or joined) or rounds == max_rounds:
            break
    return canonical_labels(labels)
