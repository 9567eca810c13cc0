"""Exact quantities on chordal conflict graphs.

On a chordal graph any clique tree yields closed forms for the back-off
rates, the normalizing constant, the stationary distribution, and the Gibbs
entropy; none of them depend on which valid tree was picked.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleTargetError
from .free_energy import (
    BackoffRates,
    Region,
    RegionSet,
    _clique_edges,
    _validate_phi,
    backoff_from_regions,
    build_kikuchi_regions,
    kmax_rates_recursive,
)
from .graphs import CliqueTree, clique_tree, maximal_cliques


@dataclass
class ChordalSolution:
    """Exact rates plus the normalizing constant and the tree they came from."""

    rates: BackoffRates
    Z: float
    clique_tree: CliqueTree


def _clique_sums(tree, phi):
    sums = []
    for K in tree.cliques:
        total = float(sum(phi[i] for i in K))
        if total >= 1.0:
            raise InfeasibleTargetError(
                f"maximal clique {K} has target sum {total} >= 1", region=K, total=total
            )
        sums.append(total)
    return sums


def exact_rates_chordal(G, phi, tree=None):
    """Exact back-off rates on a chordal graph.

    Per link: nu_i = phi_i * prod over separators containing i of
    (1 - sum phi) / prod over maximal cliques containing i of (1 - sum phi);
    Z is the same separator-over-clique product without the per-link
    restriction. Separators repeated across tree edges count once per edge.
    """
    phi = _validate_phi(phi, G.n)
    if tree is None:
        tree = clique_tree(G)
    clique_sums = _clique_sums(tree, phi)
    sep_sums = [float(sum(phi[i] for i in S)) for S in tree.separators]

    lognu = np.log(phi)
    logz = 0.0
    for K, total in zip(tree.cliques, clique_sums):
        term = math.log1p(-total)
        logz -= term
        for i in K:
            lognu[i] -= term
    for S, total in zip(tree.separators, sep_sums):
        term = math.log1p(-total)  # empty separators contribute log(1) = 0
        logz += term
        for i in S:
            lognu[i] += term
    rates = BackoffRates(np.exp(lognu), "chordal-exact", feasibility_warning=False)
    return ChordalSolution(rates, math.exp(logz), tree)


def _set_factor(members, phi, x):
    """Sum-based factor of a node set: 1 - sum(phi) when no member is active,
    the active member's phi when exactly one is, zero otherwise."""
    active = [i for i in members if x[i]]
    if not active:
        return 1.0 - float(sum(phi[i] for i in members))
    if len(active) == 1:
        return float(phi[active[0]])
    return 0.0


def stationary_probability_chordal(tree, phi, x):
    """Stationary probability of activity vector ``x`` given the exact
    per-link marginals ``phi``: the product of clique factors over the
    product of separator factors. Non-independent vectors get probability 0.
    """
    phi = _validate_phi(phi)
    x = np.asarray(x).astype(int)
    numerator = 1.0
    for K in tree.cliques:
        factor = _set_factor(K, phi, x)
        if factor == 0.0:
            return 0.0
        numerator *= factor
    denominator = 1.0
    for S in tree.separators:
        if S:
            denominator *= _set_factor(S, phi, x)
    return numerator / denominator


def gibbs_entropy_chordal(tree, phi):
    """Entropy of the stationary distribution from the clique-tree formula:
    -sum phi log phi + separator terms - clique terms, each term of the form
    (1 - sum phi) log(1 - sum phi)."""
    phi = _validate_phi(phi)
    clique_sums = _clique_sums(tree, phi)
    entropy = -float((phi * np.log(phi)).sum())
    for S in tree.separators:
        total = float(sum(phi[i] for i in S))
        entropy += (1.0 - total) * math.log1p(-total)
    for total in clique_sums:
        entropy -= (1.0 - total) * math.log1p(-total)
    return entropy


def chordal_region_set(G, tree=None):
    """Clique-tree region set: maximal cliques with counting number +1, one
    -1 per tree edge merged onto its separator set, and the two per-link
    special regions (+1 for the link factor, -1 baseline for the link).

    Tree edges whose separators coincide share one region whose counting
    number is minus the multiplicity; single-node separators merge into the
    link's plain region.
    """
    if tree is None:
        tree = clique_tree(G)
    sep_multiplicity = Counter(S for S in tree.separators if S)
    regions = []
    for K in tree.cliques:
        if len(K) >= 2:
            regions.append(Region(K, _clique_edges(K), counting_number=1))
    for S, mult in sorted(sep_multiplicity.items()):
        if len(S) >= 2:
            regions.append(Region(S, _clique_edges(S), counting_number=-mult))
    for i in range(G.n):
        regions.append(Region((i,), node_factor=i, counting_number=1))
        base = -1 if any(i in K for K in tree.cliques if len(K) >= 2) else 0
        regions.append(
            Region((i,), counting_number=base - sep_multiplicity.get((i,), 0))
        )
    return RegionSet("chordal", regions)


def verify_chordal_kikuchi_identity(G, phi=None, rate_tol=1e-12):
    """Check the chordal fingerprint of the intersection-closure counting
    numbers, plus agreement of the rates they induce.

    For every region below the base level the counting number must equal
    minus the number of tree edges whose separator is the region's node set,
    minus one more for single-node regions. The rates from the closure set,
    the clique-tree set, the size-n clique evaluation, and the closed form
    must agree within ``rate_tol`` (relative). Returns a diff list; empty
    means everything holds.
    """
    tree = clique_tree(G)
    kikuchi = build_kikuchi_regions(G, G.n)
    sep_multiplicity = Counter(S for S in tree.separators if S)
    diffs = []
    for r in kikuchi.regions:
        if r.level is None or r.level == 0:
            continue
        expected = -sep_multiplicity.get(r.variables, 0) - (1 if len(r.variables) == 1 else 0)
        if r.counting_number != expected:
            diffs.append(
                {
                    "region": r.variables,
                    "kind": "counting-number-mismatch",
                    "expected": expected,
                    "actual": r.counting_number,
                }
            )
    for S in sep_multiplicity:
        if len(S) >= 2 and not any(
            r.variables == S and r.node_factor is None for r in kikuchi.regions
        ):
            diffs.append({"region": S, "kind": "separator-missing-from-closure"})

    if phi is None:
        omega = max(len(K) for K in maximal_cliques(G))
        phi = np.full(G.n, 0.75 / omega)
    phi = _validate_phi(phi, G.n)
    candidates = {
        "kikuchi": backoff_from_regions(kikuchi, phi).nu,
        "clique-tree-regions": backoff_from_regions(chordal_region_set(G, tree), phi).nu,
        "kmax-n": kmax_rates_recursive(G, phi, G.n).nu,
        "closed-form": exact_rates_chordal(G, phi, tree).rates.nu,
    }
    names = sorted(candidates)
    for a_idx in range(len(names)):
        for b_idx in range(a_idx + 1, len(names)):
            a, b = names[a_idx], names[b_idx]
            rel = np.abs(candidates[a] - candidates[b]) / np.maximum(
                np.abs(candidates[a]), np.abs(candidates[b])
            )
            worst = float(rel.max())
            if worst > rate_tol:
                diffs.append(
                    {"kind": "rate-mismatch", "pair": (a, b), "max_relative_error": worst}
                )
    return diffs
