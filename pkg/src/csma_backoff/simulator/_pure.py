"""Pure-Python event loop; reference semantics for the compiled kernel.

Both kernels draw exponentials as -log1p(-u) from the same bit-generator
stream and break event-time ties by node id, so for a given seed they produce
bit-identical results.
"""

from __future__ import annotations

import heapq
import math

import numpy as np


def run_replication(n, indptr, neighbors, nu, horizon, warmup, bit_generator):
    """Simulate one replication; returns (busy_time, violations, events).

    Each inactive link waits an exponential back-off with mean 1/nu, then
    activates only if no neighbor is active (a blocked attempt just draws a
    new back-off). Active links transmit for an exponential mean-1 time.
    ``busy_time`` counts per-link active time inside [warmup, horizon].
    """
    adjacency = [
        [int(j) for j in neighbors[indptr[i] : indptr[i + 1]]] for i in range(n)
    ]
    rates = [float(v) for v in nu]
    gen = np.random.Generator(bit_generator)
    draw = gen.random
    log1p = math.log1p
    active = bytearray(n)
    blocked_by = [0] * n  # active-neighbor counters, cross-checked against scans
    active_since = [0.0] * n
    busy = [0.0] * n
    violations = 0
    events = 0

    heap = [(-log1p(-draw()) / rates[i], i) for i in range(n)]
    heapq.heapify(heap)
    push = heapq.heappush
    pop = heapq.heappop

    while True:
        t, node = pop(heap)
        if t >= horizon:
            break
        events += 1
        if active[node]:
            active[node] = 0
            for j in adjacency[node]:
                blocked_by[j] -= 1
            start = active_since[node]
            if t > warmup:
                busy[node] += t - (start if start > warmup else warmup)
            push(heap, (t + -log1p(-draw()) / rates[node], node))
        else:
            scanned = 0
            for j in adjacency[node]:
                scanned += active[j]
            if blocked_by[node] != scanned:
                violations += 1
            if scanned == 0:
                active[node] = 1
                active_since[node] = t
                for j in adjacency[node]:
                    blocked_by[j] += 1
                push(heap, (t + -log1p(-draw()), node))
            else:
                push(heap, (t + -log1p(-draw()) / rates[node], node))

    for i in range(n):
        if active[i]:
            start = active_since[i]
            busy[i] += horizon - (start if start > warmup else warmup)
    return np.asarray(busy), violations, events
