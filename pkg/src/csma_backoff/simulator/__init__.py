"""Event-driven simulation of the ideal CSMA dynamics.

Inactive links wait exponential back-offs (mean 1/nu_i), activate only while
no neighbor is active, and transmit for exponential mean-1 periods.
Throughput is per-link active time after warm-up. A compiled kernel is used
when available; the pure-Python kernel is a drop-in replacement that follows
the identical event and random-draw order, so both produce the same numbers
bit for bit. Set CSMA_BACKOFF_PURE=1 (or backend="python") to force the
fallback.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _pure

try:
    from .. import _core
except ImportError:
    _core = None

HAVE_COMPILED = _core is not None


@dataclass
class SimConfig:
    """Simulation horizon, warm-up share, master seed, replication count.

    Replication r draws its stream from SeedSequence(seed).spawn(...)[r], so
    replications are independent and individually reproducible.
    """

    horizon: float
    warmup_fraction: float = 0.1
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.replications < 1:
            raise ValueError("need at least one replication")


@dataclass
class SimResult:
    achieved: np.ndarray  # per-link activity fraction, averaged over replications
    per_replication: np.ndarray  # (replications, n)
    events: int
    violations: int
    wall_clock: float
    backend: str
    mean_relative_error: float | None = None
    stderr: np.ndarray | None = field(default=None, repr=False)


def _resolve_backend(backend):
    if backend == "auto":
        if _core is not None and not os.environ.get("CSMA_BACKOFF_PURE"):
            return "compiled"
        return "python"
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled core not available")
        return "compiled"
    if backend == "python":
        return "python"
    raise ValueError(f"unknown backend {backend!r}")


def simulate(G, nu, cfg, target=None, backend="auto", workers=1):
    """Run the simulation and measure per-link throughput.

    ``nu`` is a rate vector (or anything with a ``.nu``). When ``target`` is
    given the mean relative error of the averaged throughputs is included in
    the result. Replications run on a thread pool when ``workers`` > 1; the
    compiled kernel releases the GIL, so this parallelizes for real.
    """
    nu = np.ascontiguousarray(getattr(nu, "nu", nu), dtype=np.float64)
    if nu.shape != (G.n,):
        raise ValueError(f"expected {G.n} rates")
    if not (nu > 0).all():
        raise ValueError("back-off rates must be strictly positive")
    chosen = _resolve_backend(backend)
    kernel = _core.run_replication if chosen == "compiled" else _pure.run_replication

    indptr = np.zeros(G.n + 1, dtype=np.int64)
    flat = []
    for i in range(G.n):
        nbrs = sorted(G.adjacency[i])
        flat.extend(nbrs)
        indptr[i + 1] = len(flat)
    neighbors = np.asarray(flat, dtype=np.int32)

    warmup = cfg.warmup_fraction * cfg.horizon
    measured = cfg.horizon - warmup
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)

    def one(child):
        return kernel(
            G.n, indptr, neighbors, nu, cfg.horizon, warmup, np.random.PCG64(child)
        )

    start = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, children))
    else:
        outcomes = [one(child) for child in children]
    wall = time.perf_counter() - start

    per_rep = np.vstack([busy for busy, _, _ in outcomes]) / measured
    violations = sum(v for _, v, _ in outcomes)
    events = sum(e for _, _, e in outcomes)
    achieved = per_rep.mean(axis=0)
    stderr = None
    if cfg.replications > 1:
        stderr = per_rep.std(axis=0, ddof=1) / np.sqrt(cfg.replications)
    mre = None
    if target is not None:
        mre = mean_relative_error(target, achieved)
    return SimResult(
        achieved=achieved,
        per_replication=per_rep,
        events=events,
        violations=violations,
        wall_clock=wall,
        backend=chosen,
        mean_relative_error=mre,
        stderr=stderr,
    )


def mean_relative_error(target, achieved):
    """Average over links of |achieved - target| / target."""
    target = np.asarray(target, dtype=np.float64)
    achieved = np.asarray(achieved, dtype=np.float64)
    if target.shape != achieved.shape:
        raise ValueError("target and achieved must have matching shapes")
    if (target <= 0).any():
        raise ValueError("targets must be strictly positive")
    return float(np.mean(np.abs(achieved - target) / target))
