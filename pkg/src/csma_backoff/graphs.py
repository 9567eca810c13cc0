"""Conflict graphs for ideal CSMA networks.

Nodes are link ids 0..n-1; an edge means the two links cannot transmit at the
same time. Graphs are immutable after construction, so everything here is safe
to call concurrently on a shared instance. Cliques are plain sorted tuples of
node ids, which makes deduplication and equality trivial.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import NotChordalError


class ConflictGraph:
    """Undirected conflict graph on ``n`` links.

    Edges are kept in canonical form (i < j, lexicographically sorted) and
    adjacency as per-node frozensets. Node positions and the generator seed
    are retained as metadata so generated instances can be reproduced.
    """

    __slots__ = ("n", "edges", "adjacency", "positions", "seed")

    def __init__(self, n, edges=(), positions=None, seed=None):
        if n < 1:
            raise ValueError("a conflict graph needs at least one link")
        canonical = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) outside node range 0..{n - 1}")
            canonical.add((i, j) if i < j else (j, i))
        self.n = int(n)
        self.edges = tuple(sorted(canonical))
        neighbor_sets = [set() for _ in range(n)]
        for i, j in self.edges:
            neighbor_sets[i].add(j)
            neighbor_sets[j].add(i)
        self.adjacency = tuple(frozenset(s) for s in neighbor_sets)
        if positions is None:
            self.positions = None
        else:
            self.positions = tuple((float(x), float(y)) for x, y in positions)
            if len(self.positions) != n:
                raise ValueError("positions must cover every node")
        self.seed = seed

    def degree(self, i):
        return len(self.adjacency[i])

    @property
    def degrees(self):
        return tuple(len(s) for s in self.adjacency)

    def has_edge(self, i, j):
        return j in self.adjacency[i]

    def is_clique(self, nodes):
        nodes = list(nodes)
        return all(
            nodes[b] in self.adjacency[nodes[a]]
            for a in range(len(nodes))
            for b in range(a + 1, len(nodes))
        )

    def __repr__(self):
        return f"ConflictGraph(n={self.n}, edges={len(self.edges)})"


def random_geometric_graph(n, radius, seed):
    """Drop ``n`` nodes uniformly on the unit square and connect pairs whose
    Euclidean distance is strictly below ``radius``.

    Deterministic for fixed (n, radius, seed). Positions are stored on the
    graph at full float64 precision.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    ii, jj = np.triu_indices(n, k=1)
    close = dist[ii, jj] < radius
    edges = [(int(a), int(b)) for a, b in zip(ii[close], jj[close])]
    return ConflictGraph(n, edges, positions=pos.tolist(), seed=seed)


def enumerate_cliques(G, k_max):
    """Every clique of size 1..k_max, each exactly once as a sorted tuple.

    A size-k clique is only extended by neighbors with an id above its
    largest member, so no clique is produced twice.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    adjacency = G.adjacency
    out = []

    def grow(base, candidates):
        out.append(base)
        if len(base) == k_max:
            return
        for j in sorted(candidates):
            grow(base + (j,), {u for u in candidates & adjacency[j] if u > j})

    for v in range(G.n):
        grow((v,), {u for u in adjacency[v] if u > v})
    return out


def _cliques_within(G, allowed, size):
    """Cliques of exactly ``size`` whose members all lie in ``allowed``."""
    if size == 0:
        return [()]
    allowed = sorted(allowed)
    adjacency = G.adjacency
    out = []

    def grow(base, candidates):
        if len(base) == size:
            out.append(base)
            return
        for j in candidates:
            grow(base + (j,), [u for u in candidates if u > j and u in adjacency[j]])

    grow((), allowed)
    return out


def count_containing_cliques(G, clique, size):
    """Number of cliques of exactly ``size`` that strictly contain ``clique``.

    Any such clique is ``clique`` plus a clique of ``size - len(clique)``
    nodes drawn from the common neighborhood, so that is what gets counted.
    """
    clique = tuple(clique)
    if size <= len(clique):
        raise ValueError("size must exceed the clique's own size")
    if not G.is_clique(clique):
        raise ValueError(f"{clique} is not a clique of the graph")
    common = set(G.adjacency[clique[0]])
    for v in clique[1:]:
        common &= G.adjacency[v]
    return len(_cliques_within(G, common, size - len(clique)))


def maximal_cliques(G):
    """Inclusion-maximal cliques (Bron-Kerbosch with pivoting), sorted."""
    adjacency = G.adjacency
    out = []

    def expand(partial, candidates, excluded):
        if not candidates and not excluded:
            out.append(tuple(sorted(partial)))
            return
        pivot = max(candidates | excluded, key=lambda u: (len(candidates & adjacency[u]), -u))
        for v in sorted(candidates - adjacency[pivot]):
            expand(partial | {v}, candidates & adjacency[v], excluded & adjacency[v])
            candidates = candidates - {v}
            excluded = excluded | {v}

    expand(set(), set(range(G.n)), set())
    out.sort()
    return out


def is_chordal(G):
    """Chordality test: maximum cardinality search, then verify the resulting
    elimination ordering is perfect.

    Returns ``(True, elimination_ordering)`` or ``(False, None)``.
    """
    n = G.n
    weight = [0] * n
    visited = [False] * n
    visit_order = []
    for _ in range(n):
        best, best_weight = -1, -1
        for u in range(n):
            if not visited[u] and weight[u] > best_weight:
                best, best_weight = u, weight[u]
        visited[best] = True
        visit_order.append(best)
        for w in G.adjacency[best]:
            if not visited[w]:
                weight[w] += 1
    elimination = visit_order[::-1]
    position = {v: idx for idx, v in enumerate(elimination)}
    for v in elimination:
        later = [u for u in G.adjacency[v] if position[u] > position[v]]
        if later:
            parent = min(later, key=position.__getitem__)
            if not (set(later) - {parent}) <= G.adjacency[parent]:
                return False, None
    return True, tuple(elimination)


@dataclass(frozen=True)
class CliqueTree:
    """Maximal cliques of a chordal graph plus spanning-tree edges.

    ``separators[e]`` is the sorted intersection of the two cliques joined by
    ``tree_edges[e]``. On disconnected graphs the tree is completed through
    empty separators, which contribute nothing to any product they enter.
    """

    cliques: tuple
    tree_edges: tuple
    separators: tuple

    def cliques_containing(self, node):
        return [idx for idx, K in enumerate(self.cliques) if node in K]


def clique_tree(G, tie_break_seed=None):
    """Clique tree via a maximum-weight spanning tree of the clique
    intersection graph (weights |K ∩ K'|).

    Tie-breaking is lexicographic on clique indices by default; passing
    ``tie_break_seed`` randomizes it, which is useful for checking that
    downstream results do not depend on the tree choice.
    """
    chordal, _ = is_chordal(G)
    if not chordal:
        raise NotChordalError("clique trees exist only for chordal graphs")
    cliques = maximal_cliques(G)
    m = len(cliques)
    if m == 1:
        return CliqueTree((cliques[0],), (), ())
    clique_sets = [set(K) for K in cliques]
    candidates = []
    rng = None if tie_break_seed is None else np.random.default_rng(tie_break_seed)
    for a in range(m):
        for b in range(a + 1, m):
            w = len(clique_sets[a] & clique_sets[b])
            tie = rng.random() if rng is not None else 0.0
            candidates.append((-w, tie, a, b))
    candidates.sort()

    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges, separators = [], []
    for _, _, a, b in candidates:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        parent[ra] = rb
        edges.append((a, b))
        separators.append(tuple(sorted(clique_sets[a] & clique_sets[b])))
        if len(edges) == m - 1:
            break
    return CliqueTree(tuple(cliques), tuple(edges), tuple(separators))


def random_chordal_graph(n, seed, attach=0.5):
    """Random chordal graph; test scaffolding, not part of the model.

    Draws a random elimination ordering and connects each node to a random
    clique among the nodes later in the ordering, which makes the ordering
    perfect by construction. ``attach`` controls how large those cliques get.
    """
    rng = np.random.default_rng(seed)
    order = [int(v) for v in rng.permutation(n)]
    neighbor_sets = [set() for _ in range(n)]
    edges = []
    for idx in range(n - 2, -1, -1):
        v = order[idx]
        later = order[idx + 1 :]
        anchor = later[int(rng.integers(len(later)))]
        clique = [anchor]
        candidates = [u for u in later if u != anchor and anchor in neighbor_sets[u]]
        while candidates and rng.random() < attach:
            u = candidates[int(rng.integers(len(candidates)))]
            clique.append(u)
            candidates = [w for w in candidates if w != u and u in neighbor_sets[w]]
        for u in clique:
            edges.append((v, u))
            neighbor_sets[v].add(u)
            neighbor_sets[u].add(v)
    return ConflictGraph(n, edges, seed=seed)


# --- JSON graph format: {n, edges (sorted), positions?, seed?} ---


def graph_to_json(G):
    data = {"n": G.n, "edges": [list(e) for e in G.edges]}
    if G.positions is not None:
        data["positions"] = [list(p) for p in G.positions]
    if G.seed is not None:
        data["seed"] = G.seed
    return data


def graph_from_json(data):
    return ConflictGraph(
        data["n"],
        [tuple(e) for e in data.get("edges", [])],
        positions=data.get("positions"),
        seed=data.get("seed"),
    )


def save_graph(G, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(graph_to_json(G), fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def load_graph(path):
    with open(path) as fh:
        return graph_from_json(json.load(fh))
