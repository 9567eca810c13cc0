import math

import numpy as np
import pytest

from csma_backoff import (
    ConflictGraph,
    InfeasibleTargetError,
    NotChordalError,
    backoff_from_regions,
    chordal_region_set,
    clique_tree,
    enumerate_independent_sets,
    exact_rates_chordal,
    forward_throughputs,
    gibbs_entropy_chordal,
    kmax_rates_recursive,
    random_chordal_graph,
    stationary_probability_chordal,
    verify_chordal_kikuchi_identity,
)
import reference


def test_exact_rates_path(path3):
    phi = np.array([0.2, 0.3, 0.2])
    sol = exact_rates_chordal(path3, phi)
    np.testing.assert_allclose(sol.rates.nu, [0.4, 0.84, 0.4], rtol=1e-12)
    assert sol.Z == pytest.approx(2.8, rel=1e-12)
    assert sol.rates.method == "chordal-exact"
    assert not sol.rates.feasibility_warning


def test_exact_rates_single_clique():
    for m in (2, 3, 5):
        G = ConflictGraph(m, [(a, b) for a in range(m) for b in range(a + 1, m)])
        alpha = 0.8 / m
        sol = exact_rates_chordal(G, np.full(m, alpha))
        np.testing.assert_allclose(sol.rates.nu, alpha / (1 - m * alpha), rtol=1e-12)


def test_exact_rates_star(star4):
    phi = np.full(4, 0.2)
    sol = exact_rates_chordal(star4, phi)
    # three maximal cliques {0,l}, separators {0} twice
    np.testing.assert_allclose(sol.rates.nu[0], 0.2 * 0.8**2 / 0.6**3, rtol=1e-12)
    np.testing.assert_allclose(sol.rates.nu[1:], 0.2 / 0.6, rtol=1e-12)
    achieved, _ = forward_throughputs(star4, sol.rates.nu)
    np.testing.assert_allclose(achieved, phi, rtol=1e-12)


def test_exact_rates_rejects_non_chordal(cycle4):
    with pytest.raises(NotChordalError):
        exact_rates_chordal(cycle4, np.full(4, 0.2))


def test_exact_rates_rejects_clique_overload(k3):
    with pytest.raises(InfeasibleTargetError):
        exact_rates_chordal(k3, np.full(3, 0.35))


def test_exact_rates_independent_of_tree_choice():
    rng = np.random.default_rng(51)
    for seed in range(10):
        G = random_chordal_graph(12, seed, attach=0.7)
        phi = reference.random_feasible_phi(G, rng, 0.85)
        base = exact_rates_chordal(G, phi).rates.nu
        for tie_seed in (1, 2, 3):
            alt_tree = clique_tree(G, tie_break_seed=tie_seed)
            alt = exact_rates_chordal(G, phi, tree=alt_tree).rates.nu
            np.testing.assert_allclose(alt, base, rtol=1e-12)


def test_forward_reproduces_targets():
    rng = np.random.default_rng(52)
    for seed in range(10):
        G = random_chordal_graph(10, seed)
        phi = reference.random_feasible_phi(G, rng, 0.9)
        sol = exact_rates_chordal(G, phi)
        achieved, Z = forward_throughputs(G, sol.rates.nu)
        np.testing.assert_allclose(achieved, phi, rtol=1e-9)
        assert Z == pytest.approx(sol.Z, rel=1e-9)


# --- stationary probabilities ----------------------------------------------------


def test_stationary_probability_path(path3):
    phi = np.array([0.2, 0.3, 0.2])
    tree = clique_tree(path3)
    assert stationary_probability_chordal(tree, phi, [0, 1, 0]) == pytest.approx(0.3)
    sol = exact_rates_chordal(path3, phi)
    assert stationary_probability_chordal(tree, phi, [0, 0, 0]) == pytest.approx(1 / sol.Z)


def test_stationary_probability_zero_on_conflicts(path3):
    tree = clique_tree(path3)
    phi = np.array([0.2, 0.3, 0.2])
    assert stationary_probability_chordal(tree, phi, [1, 1, 0]) == 0.0


def test_stationary_probability_sums_to_one():
    rng = np.random.default_rng(53)
    for seed in range(10):
        G = random_chordal_graph(11, seed)
        phi = reference.random_feasible_phi(G, rng, 0.85)
        tree = clique_tree(G)
        space = enumerate_independent_sets(G)
        total = sum(
            stationary_probability_chordal(
                tree, phi, [(mask >> i) & 1 for i in range(G.n)]
            )
            for mask in space.masks
        )
        assert total == pytest.approx(1.0, abs=1e-10)


def test_stationary_probability_matches_product_form():
    rng = np.random.default_rng(54)
    G = random_chordal_graph(9, 3)
    phi = reference.random_feasible_phi(G, rng, 0.8)
    sol = exact_rates_chordal(G, phi)
    tree = sol.clique_tree
    space = enumerate_independent_sets(G)
    for mask in space.masks:
        x = [(mask >> i) & 1 for i in range(G.n)]
        direct = stationary_probability_chordal(tree, phi, x)
        weight = math.prod(float(sol.rates.nu[i]) for i in range(G.n) if x[i])
        assert direct == pytest.approx(weight / sol.Z, rel=1e-9)


# --- entropy ----------------------------------------------------------------------


def test_entropy_single_node():
    G = ConflictGraph(1)
    tree = clique_tree(G)
    assert gibbs_entropy_chordal(tree, np.array([0.5])) == pytest.approx(math.log(2))


def test_entropy_k3_uniform(k3):
    phi = np.full(3, 0.2)
    expected = -(0.4 * math.log(0.4) + 3 * 0.2 * math.log(0.2))
    assert gibbs_entropy_chordal(clique_tree(k3), phi) == pytest.approx(expected, rel=1e-12)


def test_entropy_triple_agreement_path(path3):
    phi = np.array([0.2, 0.3, 0.2])
    tree = clique_tree(path3)
    sol = exact_rates_chordal(path3, phi)
    region_formula = gibbs_entropy_chordal(tree, phi)
    space = enumerate_independent_sets(path3)
    minus_p_log_p = -sum(
        (
            lambda p: p * math.log(p)
        )(stationary_probability_chordal(tree, phi, [(m >> i) & 1 for i in range(3)]))
        for m in space.masks
    )
    closed = math.log(sol.Z) - float(phi @ np.log(sol.rates.nu))
    assert region_formula == pytest.approx(minus_p_log_p, abs=1e-12)
    assert region_formula == pytest.approx(closed, abs=1e-12)


# --- region set and closure identity ----------------------------------------------


def test_chordal_region_set_valid():
    for seed in range(12):
        G = random_chordal_graph(11, seed, attach=0.6)
        chordal_region_set(G).validate(G)


def test_chordal_region_set_rates_match_exact():
    rng = np.random.default_rng(55)
    for seed in range(8):
        G = random_chordal_graph(10, seed)
        phi = reference.random_feasible_phi(G, rng, 0.8)
        from_regions = backoff_from_regions(chordal_region_set(G), phi).nu
        closed = exact_rates_chordal(G, phi).rates.nu
        np.testing.assert_allclose(from_regions, closed, rtol=1e-12)


def test_identity_examples(path3, k3, star4):
    assert verify_chordal_kikuchi_identity(path3) == []
    assert verify_chordal_kikuchi_identity(k3) == []
    assert verify_chordal_kikuchi_identity(star4) == []


def test_identity_random_sweep():
    rng = np.random.default_rng(56)
    for seed in range(10):
        G = random_chordal_graph(12, seed, attach=0.6)
        phi = reference.random_feasible_phi(G, rng, 0.8)
        assert verify_chordal_kikuchi_identity(G, phi=phi) == []


def test_identity_rejects_non_chordal(cycle4):
    with pytest.raises(NotChordalError):
        verify_chordal_kikuchi_identity(cycle4)


# --- exactness of the size-n evaluation --------------------------------------------


def test_size_n_rates_exact_on_chordal():
    rng = np.random.default_rng(57)
    for seed in range(10):
        G = random_chordal_graph(12, seed)
        phi = reference.random_feasible_phi(G, rng, 0.85)
        recursive = kmax_rates_recursive(G, phi, G.n).nu
        closed = exact_rates_chordal(G, phi).rates.nu
        np.testing.assert_allclose(recursive, closed, rtol=1e-9)
        achieved, _ = forward_throughputs(G, recursive)
        np.testing.assert_allclose(achieved, phi, rtol=1e-9)
