"""Pure-Python reference kernels.

Same contracts as ``_ckernels.pyx``; selected by :mod:`erpamark.kernels` when the
compiled extension is unavailable.
"""
from __future__ import annotations

import time

# status codes shared with the compiled kernels
COMPLETE, LIMIT, TIMEOUT = 0, 1, 2

_CLOCK_EVERY = 4096


def dcss_enumerate(n, size, limit, deadline):
    """Enumerate rotation-canonical DCSS offset lists of one cardinality.

    Offsets start at 0 and ascend. A distance sequence is canonical when it
    equals its lexicographically smallest rotation, so the first gap is a
    minimum gap and every later gap (including the closing one) is at least
    that large. Results come out sorted by distance tuple.

    Returns ``(results, status)`` where results is a list of offset tuples.
    """
    results = []
    if size < 1 or size > n:
        return results, COMPLETE
    if size == 1:
        return [(0,)], COMPLETE
    if size * (size - 1) > n - 1:
        return results, COMPLETE

    used = [False] * n
    offs = [0] * size
    state = {"nodes": 0, "status": COMPLETE}

    def canonical(dist):
        k = len(dist)
        for r in range(1, k):
            rot = dist[r:] + dist[:r]
            if rot < dist:
                return False
        return True

    def rec(depth, d1):
        state["nodes"] += 1
        if deadline is not None and state["nodes"] % _CLOCK_EVERY == 0 and time.monotonic() > deadline:
            state["status"] = TIMEOUT
            return True
        if depth == size:
            last = offs[size - 1]
            if n - last < d1:
                return False
            dist = [offs[i + 1] - offs[i] for i in range(size - 1)] + [n - last]
            if canonical(dist):
                results.append(tuple(offs))
                if limit is not None and len(results) >= limit:
                    state["status"] = LIMIT
                    return True
            return False
        last = offs[depth - 1]
        remaining = size - depth
        # every remaining gap, plus the closing gap, is >= d1
        hi = n - remaining * d1
        for x in range(last + d1, hi + 1):
            new = []
            ok = True
            for j in range(depth):
                d = (x - offs[j]) % n
                dd = n - d
                if used[d] or used[dd] or d == dd or d in new or dd in new:
                    ok = False
                    break
                new.append(d)
                new.append(dd)
            if not ok:
                continue
            for d in new:
                used[d] = True
            offs[depth] = x
            stop = rec(depth + 1, d1)
            for d in new:
                used[d] = False
            if stop:
                return True
        return False

    for d1 in range(1, n // size + 1):
        if 2 * d1 == n:
            continue
        used[d1] = used[n - d1] = True
        offs[1] = d1
        stop = rec(2, d1)
        used[d1] = used[n - d1] = False
        if stop:
            break
    return results, state["status"]


def oracle_search(observed, masks, max_errors):
    """Exhaustive nearest painting among error vectors of popcount <= max_errors.

    ``masks[i]`` is the painted word of a lone error at position i. Candidates are
    visited by popcount, then by lexicographic order of their sorted positions;
    only a strictly smaller distance replaces the incumbent, which realizes the
    tie-breaking rule. Returns ``(error_word, distance)``.
    """
    n = len(masks)
    best_e = 0
    best_d = observed.bit_count()
    if best_d == 0:
        return 0, 0
    idx = [0] * max_errors
    partial = [0] * (max_errors + 1)
    found = False

    def rec(depth, start, k):
        nonlocal best_e, best_d, found
        for i in range(start, n - (k - depth) + 1):
            idx[depth] = i
            partial[depth + 1] = partial[depth] | masks[i]
            if depth + 1 == k:
                d = (partial[k] ^ observed).bit_count()
                if d < best_d:
                    best_d = d
                    best_e = 0
                    for j in range(k):
                        best_e |= 1 << idx[j]
                    if d == 0:
                        found = True
                        return
            else:
                rec(depth + 1, i + 1, k)
                if found:
                    return

    for k in range(1, max_errors + 1):
        rec(0, 0, k)
        if found:
            break
    return best_e, best_d
