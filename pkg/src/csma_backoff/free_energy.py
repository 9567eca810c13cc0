"""Region sets, counting numbers, and back-off rate formulas.

A region couples a set of links with the pairwise-exclusion factors inside it
and carries an integer counting number. Valid collections make the counting
numbers of the regions covering any link or factor sum to one, and under
clique belief the stationary point of the region free energy has a closed-form
back-off rate per link. Rates are evaluated in log space (sums of
``c_R * log1p(-sum phi)``) so large counting numbers on dense graphs cannot
overflow.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleTargetError
from .graphs import count_containing_cliques, enumerate_cliques, maximal_cliques

try:
    from . import _core
except ImportError:
    _core = None


@dataclass(frozen=True)
class Region:
    """A region: its links, the exclusion factors inside it, an optional
    per-link rate factor, and the integer counting number.

    ``level`` records the intersection depth for hierarchically built sets.
    """

    variables: tuple
    factor_edges: tuple = ()
    node_factor: int | None = None
    counting_number: int = 0
    level: int | None = None

    def __post_init__(self):
        members = set(self.variables)
        for i, j in self.factor_edges:
            if i not in members or j not in members:
                raise ValueError(f"factor ({i},{j}) has endpoints outside {self.variables}")
        if self.node_factor is not None and self.node_factor not in members:
            raise ValueError("node factor outside the region's variables")

    @property
    def identity(self):
        return (self.variables, self.factor_edges, self.node_factor)


def _region_sort_key(region):
    return (
        len(region.variables),
        region.variables,
        region.node_factor is None,
        -1 if region.node_factor is None else region.node_factor,
        region.factor_edges,
    )


@dataclass
class RegionSet:
    """A collection of regions of one construction kind.

    Kinds: "bethe", "triangle", "kmax", "kikuchi", "chordal".
    """

    kind: str
    regions: list = field(default_factory=list)
    k_max: int | None = None

    def validate(self, G):
        """Check the counting-number condition: the numbers of the regions
        containing any link, link factor, or edge factor sum to exactly one,
        and the two per-link special regions exist (link-factor regions with
        counting number one). Raises ValueError on any violation."""
        node_sum = [0] * G.n
        node_factor_sum = [0] * G.n
        edge_factor_sum = {e: 0 for e in G.edges}
        has_variable_region = [False] * G.n
        for r in self.regions:
            c = r.counting_number
            for i in r.variables:
                node_sum[i] += c
            if r.node_factor is not None:
                node_factor_sum[r.node_factor] += c
                if c != 1:
                    raise ValueError(f"link-factor region for {r.node_factor} has c={c} != 1")
            elif len(r.variables) == 1:
                has_variable_region[r.variables[0]] = True
            for e in r.factor_edges:
                if e not in edge_factor_sum:
                    raise ValueError(f"factor for non-edge {e}")
                edge_factor_sum[e] += c
        for i in range(G.n):
            if node_sum[i] != 1:
                raise ValueError(f"node {i}: counting numbers sum to {node_sum[i]}, not 1")
            if node_factor_sum[i] != 1:
                raise ValueError(f"link factor {i}: counting numbers sum to {node_factor_sum[i]}")
            if not has_variable_region[i]:
                raise ValueError(f"missing plain variable region for node {i}")
        for e, total in edge_factor_sum.items():
            if total != 1:
                raise ValueError(f"edge factor {e}: counting numbers sum to {total}, not 1")
        return True

    def to_json(self):
        return {
            "kind": self.kind,
            "k_max": self.k_max,
            "regions": [
                {
                    "variables": list(r.variables),
                    "factors": [list(e) for e in r.factor_edges],
                    "node_factor": r.node_factor,
                    "c": r.counting_number,
                    "level": r.level,
                }
                for r in sorted(self.regions, key=_region_sort_key)
            ],
        }


@dataclass
class BackoffRates:
    """Per-link back-off rates plus provenance.

    ``feasibility_warning`` is True when the targets passed every region sum
    check but were not certified achievable; the exact solvers clear it.
    """

    nu: np.ndarray
    method: str
    k_max: int | None = None
    feasibility_warning: bool = True


def _validate_phi(phi, n=None):
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 1:
        raise ValueError("throughput vector must be one-dimensional")
    if n is not None and phi.size != n:
        raise ValueError(f"expected {n} throughputs, got {phi.size}")
    for i, value in enumerate(phi):
        if not value > 0.0:
            raise ValueError(f"throughput of link {i} must be positive, got {value}")
        if value >= 1.0:
            raise InfeasibleTargetError(
                f"link {i} alone has target {value} >= 1", region=(i,), total=float(value)
            )
    return phi


def _clique_edges(clique):
    return tuple(
        (clique[a], clique[b]) for a in range(len(clique)) for b in range(a + 1, len(clique))
    )


def counting_number(G, clique, k_max):
    """Closed-form counting number of a clique's region in the size-k_max
    construction: 1 if the clique has more than one node, plus the
    alternating count of its strict clique supersets up to size k_max."""
    clique = tuple(clique)
    k = len(clique)
    if not 1 <= k <= k_max:
        raise ValueError("clique size must lie in 1..k_max")
    if not G.is_clique(clique):
        raise ValueError(f"{clique} is not a clique")
    c = 1 if k > 1 else 0
    for s in range(k + 1, k_max + 1):
        count = count_containing_cliques(G, clique, s)
        if count == 0:
            break  # no supersets of this size means none of any larger size
        c += count if (s - k) % 2 == 0 else -count
    return c


def _superset_deltas(cliques):
    """For every clique K, the alternating superset sum
    sum_{C strict clique superset of K} (-1)**(|C|-|K|), aggregated by
    scattering each enumerated clique onto its strict subsets."""
    delta = {}
    for K in cliques:
        k = len(K)
        if k < 2:
            continue
        for mask in range(1, (1 << k) - 1):
            sub = tuple(K[b] for b in range(k) if mask >> b & 1)
            sign = -1 if (k - len(sub)) % 2 else 1
            delta[sub] = delta.get(sub, 0) + sign
    return delta


def build_kmax_regions(G, k_max):
    """Region set with one region per clique of size 2..k_max plus the two
    per-link special regions required by every valid construction."""
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    cliques = enumerate_cliques(G, k_max)
    delta = _superset_deltas(cliques)
    regions = []
    for K in cliques:
        if len(K) >= 2:
            regions.append(
                Region(K, _clique_edges(K), counting_number=1 + delta.get(K, 0))
            )
    for i in range(G.n):
        regions.append(Region((i,), node_factor=i, counting_number=1))
        regions.append(Region((i,), counting_number=delta.get((i,), 0)))
    return RegionSet("kmax", regions, k_max=k_max)


def backoff_from_regions(region_set, phi):
    """Evaluate the stationary-point rate formula on a valid region set.

    Per link: log nu_i = log phi_i - log(1-phi_i)
    - sum over factorless regions containing i of c_R * log(1 - sum phi).
    Regions are processed in a canonical order, so the result does not depend
    on how the set was assembled. Raises InfeasibleTargetError naming the
    first region whose throughput sum reaches one.
    """
    phi = _validate_phi(phi)
    n = phi.size
    lognu = np.log(phi) - np.log1p(-phi)
    for r in sorted(region_set.regions, key=_region_sort_key):
        if r.variables[-1] >= n:
            raise ValueError("region mentions a link beyond the throughput vector")
        total = float(sum(phi[i] for i in r.variables))
        if total >= 1.0:
            raise InfeasibleTargetError(
                f"region {r.variables} has target sum {total} >= 1",
                region=r.variables,
                total=total,
            )
        if r.node_factor is not None or r.counting_number == 0:
            continue
        contribution = r.counting_number * math.log1p(-total)
        for i in r.variables:
            lognu[i] -= contribution
    method = {"bethe": "bethe", "triangle": "triangle"}.get(region_set.kind, region_set.kind)
    return BackoffRates(np.exp(lognu), method, k_max=region_set.k_max)


def bethe_rates(G, phi):
    """Pairwise (edge-region) rates; exactly the k_max=2 region evaluation."""
    rates = backoff_from_regions(build_kmax_regions(G, 2), phi)
    return BackoffRates(rates.nu, "bethe", k_max=2)


def triangle_rates(G, phi):
    """Edge-and-triangle rates; exactly the k_max=3 region evaluation."""
    rates = backoff_from_regions(build_kmax_regions(G, 3), phi)
    return BackoffRates(rates.nu, "triangle", k_max=3)


# --- recursive clique-product evaluation -----------------------------------


def _use_compiled(backend):
    if backend == "python":
        return False
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled core not available")
        return True
    if backend != "auto":
        raise ValueError(f"unknown backend {backend!r}")
    return _core is not None and not os.environ.get("CSMA_BACKOFF_PURE")


def _corrections_python(G, phi, k_cap):
    """Per-node, per-size clique correction sums.

    acc[i][c] collects, over pairs (S, C) with i in S, S a subset of the
    clique C, |C| = c, the signed terms (-1)**(|C|-|S|) * log1p(-sum phi_S).
    Enumeration: cliques containing i grow by ascending neighbor index, and
    every added member is branched into "in C only" / "in C and S".
    """
    n = G.n
    acc = np.zeros((n, k_cap + 1))
    max_size = 1
    for i in range(n):
        nbrs = sorted(G.adjacency[i])
        d = len(nbrs)
        if d == 0:
            continue
        local = {v: idx for idx, v in enumerate(nbrs)}
        masks = [0] * d
        for idx, v in enumerate(nbrs):
            for w in G.adjacency[v]:
                j = local.get(w)
                if j is not None:
                    masks[idx] |= 1 << j
        row = acc[i]
        members = [i]

        def grow(cand, c_size, s_size, s_sum):
            nonlocal max_size
            if c_size > max_size:
                max_size = c_size
            if c_size >= 2:
                term = math.log1p(-s_sum)
                if (c_size - s_size) % 2 == 0:
                    row[c_size] += term
                else:
                    row[c_size] -= term
            if c_size == k_cap:
                return
            rest = cand
            while rest:
                low = rest & -rest
                j = low.bit_length() - 1
                rest ^= low
                new_cand = cand & masks[j] & ~((1 << (j + 1)) - 1)
                grow(new_cand, c_size + 1, s_size, s_sum)
                s_next = s_sum + phi[nbrs[j]]
                if s_next >= 1.0:
                    members.append(nbrs[j])
                    bad = tuple(sorted(members))
                    raise InfeasibleTargetError(
                        f"clique {bad} has target sum {s_next} >= 1",
                        region=bad,
                        total=float(s_next),
                    )
                members.append(nbrs[j])
                grow(new_cand, c_size + 1, s_size + 1, s_next)
                members.pop()

        grow((1 << d) - 1, 1, 1, float(phi[i]))
    return acc, max_size


def _corrections(G, phi, k_cap, backend):
    if _use_compiled(backend) and max(G.degrees, default=0) <= 64:
        indptr = np.zeros(G.n + 1, dtype=np.int64)
        flat = []
        for i in range(G.n):
            nbrs = sorted(G.adjacency[i])
            flat.extend(nbrs)
            indptr[i + 1] = len(flat)
        neighbors = np.asarray(flat, dtype=np.int32)
        acc = np.zeros((G.n, k_cap + 1))
        status, max_size, bad = _core.clique_corrections(
            G.n, indptr, neighbors, phi, k_cap, acc
        )
        if status != 0:
            bad = tuple(int(v) for v in bad)
            total = float(phi[list(bad)].sum())
            raise InfeasibleTargetError(
                f"clique {bad} has target sum {total} >= 1", region=bad, total=total
            )
        return acc, max_size
    return _corrections_python(G, phi, k_cap)


def kmax_rates_sweep(G, phi, k_max, backend="auto"):
    """Rates for every clique-size cap 1..min(k_max, max clique size).

    One clique-enumeration pass yields the per-size corrections, after which
    each successive cap multiplies in its correction, so the whole sweep
    costs no more than the largest cap alone.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    phi = _validate_phi(phi, G.n)
    k_cap = min(k_max, G.n)
    lognu = np.log(phi) - np.log1p(-phi)
    out = {1: np.exp(lognu)}
    if k_cap == 1:
        return out
    acc, max_size = _corrections(G, phi, k_cap, backend)
    for k in range(2, min(k_cap, max_size) + 1):
        lognu = lognu - acc[:, k]
        out[k] = np.exp(lognu)
    return out


def kmax_rates_recursive(G, phi, k_max, backend="auto"):
    """Size-k_max rates built up one clique size at a time.

    Matches the region evaluation of ``build_kmax_regions`` to floating-point
    round-off; this is the fast path for large graphs. A cap beyond the
    graph's maximum clique size changes nothing.
    """
    sweep = kmax_rates_sweep(G, phi, k_max, backend=backend)
    effective = min(k_max, max(sweep))
    return BackoffRates(sweep[effective], "kmax", k_max=k_max)


# --- Kikuchi construction ---------------------------------------------------


def _is_subregion(a, b):
    """Region containment on (variables, edge factors, node factor) keys."""
    if not a[0] <= b[0]:
        return False
    if not a[1] <= b[1]:
        return False
    return a[2] is None or a[2] == b[2]


def build_kikuchi_regions(G, k_max):
    """Intersection-closure region hierarchy.

    Level 0 holds the per-link factor regions plus the regions of all cliques
    of size k_max and the smaller maximal cliques. Each next level collects
    the pairwise intersections of the newest level with everything so far
    (skipping nested pairs), drops duplicates and sets dominated within the
    level, and stops when nothing new appears. Counting numbers follow the
    superset rule c_R = 1 - sum of c over strict super-regions.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    max_cliques = maximal_cliques(G)
    omega = max(len(K) for K in max_cliques)
    k_eff = min(k_max, omega)

    base = []
    if k_eff >= 2:
        size_k = [K for K in enumerate_cliques(G, k_eff) if len(K) == k_eff]
        smaller_maximal = [K for K in max_cliques if 2 <= len(K) < k_eff]
        for K in sorted(set(size_k) | set(smaller_maximal)):
            base.append((frozenset(K), frozenset(_clique_edges(K)), None))
    for i in range(G.n):
        base.append((frozenset((i,)), frozenset(), i))

    levels = [base]
    seen = set(base)
    current = base
    while True:
        produced = set()
        pool = [r for level in levels for r in level]
        for ra in current:
            for rb in pool:
                if ra == rb or _is_subregion(ra, rb) or _is_subregion(rb, ra):
                    continue
                variables = ra[0] & rb[0]
                if not variables:
                    continue
                nf = ra[2] if ra[2] == rb[2] else None
                cand = (variables, ra[1] & rb[1], nf)
                if cand not in seen:
                    produced.add(cand)
        if not produced:
            break
        kept = [
            r
            for r in produced
            if not any(r != other and _is_subregion(r, other) for other in produced)
        ]
        kept.sort(key=lambda r: (len(r[0]), sorted(r[0])))
        levels.append(kept)
        seen.update(kept)
        current = kept

    numbered = []  # (key, level, c) in level order
    counting = {}
    for level_index, level in enumerate(levels):
        for key in level:
            c = 1 - sum(
                counting[other]
                for other in counting
                if other != key and _is_subregion(key, other)
            )
            counting[key] = c
            numbered.append((key, level_index, c))

    regions = []
    covered_singletons = set()
    for (variables, factors, nf), level_index, c in numbered:
        members = tuple(sorted(variables))
        if nf is None and len(members) == 1:
            covered_singletons.add(members[0])
        regions.append(
            Region(members, tuple(sorted(factors)), nf, counting_number=c, level=level_index)
        )
    for i in range(G.n):
        if i not in covered_singletons:
            # isolated links never arise as intersections; their plain region
            # carries counting number zero
            regions.append(Region((i,), counting_number=0))
    return RegionSet("kikuchi", regions, k_max=k_max)


def verify_kikuchi_equivalence(G, k_max):
    """Diff table between the size-k_max clique region set and the Kikuchi
    set grown from the same cliques.

    Empty list means the two coincide: shared regions carry identical
    counting numbers and every clique region missing from the Kikuchi set has
    counting number zero.
    """
    kmax_set = build_kmax_regions(G, k_max)
    kikuchi_set = build_kikuchi_regions(G, k_max)
    direct = {r.identity: r.counting_number for r in kmax_set.regions}
    hierarchical = {r.identity: r.counting_number for r in kikuchi_set.regions}

    def order(item):
        (variables, factors, node_factor), _ = item
        return (variables, factors, node_factor is None, node_factor or 0)

    diffs = []
    for key, c in sorted(direct.items(), key=order):
        if key in hierarchical:
            if hierarchical[key] != c:
                diffs.append(
                    {
                        "region": key[0],
                        "kind": "counting-number-mismatch",
                        "kmax": c,
                        "kikuchi": hierarchical[key],
                    }
                )
        elif c != 0:
            diffs.append({"region": key[0], "kind": "absent-with-nonzero", "kmax": c})
    for key, c in sorted(hierarchical.items(), key=order):
        if key not in direct:
            diffs.append({"region": key[0], "kind": "extra-kikuchi-region", "kikuchi": c})
    return diffs


# --- free energy and message-ratio identities -------------------------------


def clique_belief_free_energy(region_set, phi, nu):
    """Average energy, entropy, and free energy under clique belief.

    U = -sum_i phi_i log nu_i; the entropy combines the per-link terms with
    one weighted term per region of the set. Returns (U, H, F) with F = U - H.
    """
    phi = _validate_phi(phi)
    nu = np.asarray(getattr(nu, "nu", nu), dtype=np.float64)
    if nu.shape != phi.shape:
        raise ValueError("phi and nu must have matching shapes")
    energy = -float((phi * np.log(nu)).sum())
    entropy = -float((phi * np.log(phi)).sum())
    for r in sorted(region_set.regions, key=_region_sort_key):
        total = float(sum(phi[i] for i in r.variables))
        if total >= 1.0:
            raise InfeasibleTargetError(
                f"region {r.variables} has target sum {total} >= 1",
                region=r.variables,
                total=total,
            )
        if r.counting_number != 0:
            entropy -= r.counting_number * (1.0 - total) * math.log1p(-total)
    return energy, entropy, energy - entropy


def message_ratios(G, phi):
    """Closed-form inverse-BP message ratios (off state over on state) for
    every directed edge."""
    phi = _validate_phi(phi, G.n)
    ratios = {}
    for i, j in G.edges:
        denom = 1.0 - phi[i] - phi[j]
        if denom <= 0.0:
            raise InfeasibleTargetError(
                f"edge ({i},{j}) has target sum {phi[i] + phi[j]} >= 1",
                region=(i, j),
                total=float(phi[i] + phi[j]),
            )
        ratios[(i, j)] = (1.0 - phi[j]) / denom
        ratios[(j, i)] = (1.0 - phi[i]) / denom
    return ratios


def ibp_fixed_point_check(G, phi, ratios=None, tol=1e-12):
    """True when the message ratios satisfy the inverse-BP update identity
    ratio(j->i) = 1 + ratio(i->j) * phi_j / (1 - phi_j) on every directed
    edge, to relative tolerance ``tol``."""
    phi = _validate_phi(phi, G.n)
    if ratios is None:
        ratios = message_ratios(G, phi)
    for i, j in G.edges:
        for a, b in ((i, j), (j, i)):
            lhs = ratios[(b, a)]
            rhs = 1.0 + ratios[(a, b)] * phi[b] / (1.0 - phi[b])
            if abs(lhs - rhs) > tol * max(1.0, abs(lhs), abs(rhs)):
                return False
    return True
