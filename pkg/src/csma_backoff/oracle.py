"""Brute-force ground truth for small graphs.

Enumerates the independent-set state space, computes exact stationary
marginals for given rates, inverts the marginal map by fixed-point iteration,
and judges target feasibility. Everything here is deliberately simple; it is
the yardstick the approximation methods are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, StateSpaceCapError
from .free_energy import BackoffRates, _validate_phi
from .graphs import maximal_cliques


@dataclass
class StateSpace:
    """All activity vectors with no two neighbors active, as bitmasks.

    The empty set is always present (mask 0, first entry). ``matrix`` is the
    |states| x n 0/1 view used for marginal sums.
    """

    graph: object
    masks: list

    @property
    def matrix(self):
        if not hasattr(self, "_matrix"):
            n = self.graph.n
            m = np.zeros((len(self.masks), n), dtype=np.uint8)
            for row, mask in enumerate(self.masks):
                while mask:
                    low = mask & -mask
                    m[row, low.bit_length() - 1] = 1
                    mask ^= low
            self._matrix = m
        return self._matrix

    def __len__(self):
        return len(self.masks)


def enumerate_independent_sets(G, cap=24):
    """Backtracking enumeration of the full independent-set state space."""
    if G.n > cap:
        raise StateSpaceCapError(f"n={G.n} exceeds the enumeration cap {cap}")
    neighbor_masks = [0] * G.n
    for i, j in G.edges:
        neighbor_masks[i] |= 1 << j
        neighbor_masks[j] |= 1 << i
    masks = []

    def walk(i, chosen, blocked):
        if i == G.n:
            masks.append(chosen)
            return
        walk(i + 1, chosen, blocked)
        if not blocked >> i & 1:
            walk(i + 1, chosen | 1 << i, blocked | neighbor_masks[i])

    walk(0, 0, 0)
    return StateSpace(G, masks)


def _marginals(matrix, lognu):
    weights = np.exp(matrix @ lognu)
    Z = float(weights.sum())
    return (matrix.T @ weights) / Z, Z


def forward_throughputs(G, nu, cap=24, space=None):
    """Exact per-link throughputs and normalizing constant for given rates."""
    nu = np.asarray(getattr(nu, "nu", nu), dtype=np.float64)
    if nu.shape != (G.n,):
        raise ValueError(f"expected {G.n} rates")
    if not (nu > 0).all():
        raise ValueError("rates must be strictly positive")
    if space is None:
        space = enumerate_independent_sets(G, cap)
    phi, Z = _marginals(space.matrix, np.log(nu))
    return phi, Z


def inverse_rates_bruteforce(G, phi, tol=1e-10, max_iter=100_000, cap=24):
    """Rates reproducing the target marginals, by fixed-point iteration.

    Starts from nu_i = phi_i / (1 - phi_i) and repeats
    nu_i <- nu_i * phi_i / p_i(nu); if the log-step direction reverses the
    remaining steps are damped by 0.5. Convergence means the forward map
    matches the target within ``tol`` (max absolute error); failure to
    converge usually means the target is not achievable.
    """
    phi = _validate_phi(phi, G.n)
    space = enumerate_independent_sets(G, cap)
    matrix = space.matrix
    lognu = np.log(phi) - np.log1p(-phi)
    log_phi = np.log(phi)
    damp = 1.0
    prev_step = None
    for _ in range(max_iter):
        marginals, _ = _marginals(matrix, lognu)
        if float(np.abs(marginals - phi).max()) <= tol:
            return BackoffRates(np.exp(lognu), "oracle", feasibility_warning=False)
        step = log_phi - np.log(marginals)
        if prev_step is not None and float(step @ prev_step) < 0.0:
            damp = 0.5
        lognu += damp * step
        prev_step = step
    raise ConvergenceError(
        f"no fixed point within {max_iter} iterations; "
        "the target vector is likely not achievable"
    )


@dataclass
class FeasibilityResult:
    verdict: str  # "feasible" | "infeasible" | "unknown"
    max_clique_sum: float
    offending_clique: tuple | None = None
    converged: bool | None = None

    def __str__(self):
        return self.verdict


def feasibility_check(G, phi, cap=24, tol=1e-10, max_iter=100_000):
    """Three-valued achievability check.

    A maximal-clique sum at or above one is a certain "infeasible". Below the
    enumeration cap a converged inverse solve certifies "feasible"; a failed
    solve, or a graph too large to enumerate, yields "unknown" along with the
    clique-sum verdict.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (G.n,):
        raise ValueError(f"expected {G.n} throughputs")
    worst_sum, worst_clique = -np.inf, None
    for K in maximal_cliques(G):
        total = float(phi[list(K)].sum())
        if total > worst_sum:
            worst_sum, worst_clique = total, K
    if (phi <= 0).any():
        bad = int(np.argmin(phi))
        return FeasibilityResult("infeasible", worst_sum, offending_clique=(bad,))
    if worst_sum >= 1.0:
        return FeasibilityResult("infeasible", worst_sum, offending_clique=worst_clique)
    if G.n > cap:
        return FeasibilityResult("unknown", worst_sum)
    try:
        inverse_rates_bruteforce(G, phi, tol=tol, max_iter=max_iter, cap=cap)
    except ConvergenceError:
        return FeasibilityResult("unknown", worst_sum, converged=False)
    return FeasibilityResult("feasible", worst_sum, converged=True)
