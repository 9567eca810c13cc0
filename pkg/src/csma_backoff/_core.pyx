#cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Two entry points: the event-driven CSMA simulation loop and the per-node
clique/subset correction sums behind the recursive rate evaluation. Both
mirror the pure-Python fallbacks operation for operation, including the order
of random draws and of floating-point accumulation, so the two backends agree
bit for bit.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log1p
from numpy.random cimport bitgen_t


# --- event-driven simulation -------------------------------------------------

cdef inline bint _before(double t1, int n1, double t2, int n2) nogil:
    # event ordering: time, ties broken by node id
    return t1 < t2 or (t1 == t2 and n1 < n2)


cdef inline void _sift_down(double* ht, int* hn, int size, int pos) nogil:
    cdef int child, smallest
    cdef double t
    cdef int node
    t = ht[pos]
    node = hn[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        smallest = child
        if child + 1 < size and _before(ht[child + 1], hn[child + 1], ht[child], hn[child]):
            smallest = child + 1
        if _before(t, node, ht[smallest], hn[smallest]):
            break
        ht[pos] = ht[smallest]
        hn[pos] = hn[smallest]
        pos = smallest
    ht[pos] = t
    hn[pos] = node


def run_replication(int n, long long[::1] indptr, int[::1] neighbors,
                    double[::1] nu, double horizon, double warmup,
                    bit_generator):
    """Simulate one replication; returns (busy_time, violations, events)."""
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("expected a numpy BitGenerator")
    cdef bitgen_t* rng = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")

    busy_arr = np.zeros(n, dtype=np.float64)
    heap_t_arr = np.empty(n, dtype=np.float64)
    heap_n_arr = np.empty(n, dtype=np.int32)
    active_arr = np.zeros(n, dtype=np.uint8)
    blocked_arr = np.zeros(n, dtype=np.int32)
    since_arr = np.zeros(n, dtype=np.float64)

    cdef double[::1] busy = busy_arr
    cdef double[::1] heap_time = heap_t_arr
    cdef int[::1] heap_node = heap_n_arr
    cdef unsigned char[::1] active = active_arr
    cdef int[::1] blocked_by = blocked_arr
    cdef double[::1] active_since = since_arr

    cdef double* ht = &heap_time[0]
    cdef int* hn = &heap_node[0]

    cdef long long events = 0
    cdef long long violations = 0
    cdef int i, node, j, scanned
    cdef long long p
    cdef double t, start

    with nogil:
        for i in range(n):
            ht[i] = -log1p(-rng.next_double(rng.state)) / nu[i]
            hn[i] = i
        for i in range(n // 2 - 1, -1, -1):
            _sift_down(ht, hn, n, i)

        while True:
            t = ht[0]
            node = hn[0]
            if t >= horizon:
                break
            events += 1
            if active[node]:
                active[node] = 0
                for p in range(indptr[node], indptr[node + 1]):
                    blocked_by[neighbors[p]] -= 1
                start = active_since[node]
                if t > warmup:
                    busy[node] += t - (start if start > warmup else warmup)
                ht[0] = t + -log1p(-rng.next_double(rng.state)) / nu[node]
                _sift_down(ht, hn, n, 0)
            else:
                scanned = 0
                for p in range(indptr[node], indptr[node + 1]):
                    scanned += active[neighbors[p]]
                if blocked_by[node] != scanned:
                    violations += 1
                if scanned == 0:
                    active[node] = 1
                    active_since[node] = t
                    for p in range(indptr[node], indptr[node + 1]):
                        blocked_by[neighbors[p]] += 1
                    ht[0] = t + -log1p(-rng.next_double(rng.state))
                else:
                    ht[0] = t + -log1p(-rng.next_double(rng.state)) / nu[node]
                _sift_down(ht, hn, n, 0)

        for i in range(n):
            if active[i]:
                start = active_since[i]
                busy[i] += horizon - (start if start > warmup else warmup)

    return busy_arr, int(violations), int(events)


# --- clique/subset correction sums -------------------------------------------

cdef struct DfsOutcome:
    int status        # 0 ok, 1 infeasible subset found
    int max_size


cdef DfsOutcome _grow(unsigned long long cand, int c_size, int s_size,
                      double s_sum, int k_cap, double* row,
                      const double* phi_local, const unsigned long long* masks,
                      int* stack, int depth, int* bad_len) nogil:
    """Depth-first walk over pairs (S, C): C a clique containing the root
    grown by ascending local index, S the marked subset. Adds the signed
    log1p term of S into row[|C|] at every state."""
    cdef DfsOutcome out
    cdef DfsOutcome sub
    cdef unsigned long long rest, low, new_cand
    cdef int j
    cdef double term, s_next
    out.status = 0
    out.max_size = c_size
    if c_size >= 2:
        term = log1p(-s_sum)
        if (c_size - s_size) % 2 == 0:
            row[c_size] += term
        else:
            row[c_size] -= term
    if c_size == k_cap:
        return out
    rest = cand
    while rest:
        low = rest & (~rest + 1)
        j = 0
        while not (low >> j) & 1:
            j += 1
        rest ^= low
        if j == 63:
            new_cand = 0
        else:
            new_cand = cand & masks[j] & ~((low << 1) - 1)
        sub = _grow(new_cand, c_size + 1, s_size, s_sum, k_cap, row,
                    phi_local, masks, stack, depth, bad_len)
        if sub.max_size > out.max_size:
            out.max_size = sub.max_size
        if sub.status:
            return sub
        s_next = s_sum + phi_local[j]
        stack[depth] = j
        if s_next >= 1.0:
            out.status = 1
            bad_len[0] = depth + 1
            return out
        sub = _grow(new_cand, c_size + 1, s_size + 1, s_next, k_cap, row,
                    phi_local, masks, stack, depth + 1, bad_len)
        if sub.max_size > out.max_size:
            out.max_size = sub.max_size
        if sub.status:
            return sub
    return out


def clique_corrections(int n, long long[::1] indptr, int[::1] neighbors,
                       double[::1] phi, int k_cap, double[:, ::1] acc):
    """Fill acc[i][c] with the signed subset sums for every node; returns
    (status, max_clique_size, offending_members). Requires degree <= 64."""
    cdef int i, d, idx, j, w
    cdef long long p, q
    cdef int max_size = 1
    cdef DfsOutcome out
    cdef int bad_len = 0

    local_arr = np.empty(64, dtype=np.int32)
    masks_arr = np.empty(64, dtype=np.uint64)
    phil_arr = np.empty(64, dtype=np.float64)
    stack_arr = np.empty(66, dtype=np.int32)
    pos_arr = np.full(n, -1, dtype=np.int32)

    cdef int[::1] local = local_arr
    cdef unsigned long long[::1] masks = masks_arr
    cdef double[::1] phi_local = phil_arr
    cdef int[::1] stack = stack_arr
    cdef int[::1] position = pos_arr

    for i in range(n):
        d = <int>(indptr[i + 1] - indptr[i])
        if d == 0:
            continue
        if d > 64:
            raise ValueError("compiled kernel supports degree <= 64")
        for idx in range(d):
            w = neighbors[indptr[i] + idx]
            local[idx] = w
            position[w] = idx
            phi_local[idx] = phi[w]
            masks[idx] = 0
        for idx in range(d):
            w = local[idx]
            for q in range(indptr[w], indptr[w + 1]):
                j = position[neighbors[q]]
                if j >= 0:
                    masks[idx] |= (<unsigned long long>1) << j
        with nogil:
            out = _grow((<unsigned long long>1 << (d - 1) << 1) - 1, 1, 1,
                        phi[i], k_cap, &acc[i, 0], &phi_local[0], &masks[0],
                        &stack[0], 0, &bad_len)
        for idx in range(d):
            position[local[idx]] = -1
        if out.status:
            bad = sorted([i] + [int(local[stack[idx]]) for idx in range(bad_len)])
            return 1, max_size, tuple(bad)
        if out.max_size > max_size:
            max_size = out.max_size
    return 0, max_size, ()
