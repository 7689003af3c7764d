# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; contracts mirror ``_pykernels``."""
import time

from libc.stdint cimport uint64_t
from libc.stdlib cimport calloc, free

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

COMPLETE, LIMIT, TIMEOUT = 0, 1, 2

cdef long CLOCK_EVERY = 4096


cdef class _Dfs:
    cdef int n, size
    cdef long limit
    cdef object deadline
    cdef char* used
    cdef int* offs
    cdef int* dist
    cdef long nodes
    cdef int status
    cdef list results

    def __cinit__(self, int n, int size):
        self.used = <char*> calloc(n + 1, sizeof(char))
        self.offs = <int*> calloc(size, sizeof(int))
        self.dist = <int*> calloc(size, sizeof(int))
        if self.used == NULL or self.offs == NULL or self.dist == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.used)
        free(self.offs)
        free(self.dist)

    cdef bint canonical(self):
        cdef int k = self.size, r, i, a, b
        for r in range(1, k):
            for i in range(k):
                a = self.dist[(i + r) % k]
                b = self.dist[i]
                if a < b:
                    return False
                if a > b:
                    break
        return True

    cdef bint rec(self, int depth, int d1) except -1:
        cdef int n = self.n, size = self.size
        cdef int last, hi, x, j, d, dd, m, i
        cdef int newd[512]
        cdef bint ok
        self.nodes += 1
        if self.deadline is not None and self.nodes % CLOCK_EVERY == 0:
            if time.monotonic() > self.deadline:
                self.status = TIMEOUT
                return True
        if depth == size:
            last = self.offs[size - 1]
            if n - last < d1:
                return False
            for i in range(size - 1):
                self.dist[i] = self.offs[i + 1] - self.offs[i]
            self.dist[size - 1] = n - last
            if self.canonical():
                self.results.append(tuple([self.offs[i] for i in range(size)]))
                if self.limit >= 0 and len(self.results) >= self.limit:
                    self.status = LIMIT
                    return True
            return False
        last = self.offs[depth - 1]
        hi = n - (size - depth) * d1
        for x in range(last + d1, hi + 1):
            m = 0
            ok = True
            for j in range(depth):
                d = (x - self.offs[j]) % n
                dd = n - d
                if self.used[d] or self.used[dd] or d == dd:
                    ok = False
                    break
                # mark provisionally so collisions among the new differences are caught
                self.used[d] = 1
                self.used[dd] = 1
                newd[m] = d
                newd[m + 1] = dd
                m += 2
            if not ok:
                for i in range(m):
                    self.used[newd[i]] = 0
                continue
            self.offs[depth] = x
            if self.rec(depth + 1, d1):
                for i in range(m):
                    self.used[newd[i]] = 0
                return True
            for i in range(m):
                self.used[newd[i]] = 0
        return False


def dcss_enumerate(int n, int size, limit, deadline):
    cdef _Dfs dfs
    cdef int d1
    if size < 1 or size > n:
        return [], COMPLETE
    if size == 1:
        return [(0,)], COMPLETE
    if size * (size - 1) > n - 1:
        return [], COMPLETE
    if 2 * size > 512:
        raise ValueError("size too large for the compiled kernel")
    dfs = _Dfs(n, size)
    dfs.n = n
    dfs.size = size
    dfs.limit = -1 if limit is None else limit
    dfs.deadline = deadline
    dfs.nodes = 0
    dfs.status = COMPLETE
    dfs.results = []
    for d1 in range(1, n // size + 1):
        if 2 * d1 == n:
            continue
        dfs.used[d1] = 1
        dfs.used[n - d1] = 1
        dfs.offs[1] = d1
        stop = dfs.rec(2, d1)
        dfs.used[d1] = 0
        dfs.used[n - d1] = 0
        if stop:
            break
    return dfs.results, dfs.status


def oracle_search(observed, masks, int max_errors):
    cdef int n = len(masks)
    cdef uint64_t obs = observed
    cdef uint64_t m[64]
    cdef uint64_t partial[9]
    cdef int idx[8]
    cdef int k, depth, i, d, best_d, j
    cdef uint64_t best_e = 0
    if n > 64:
        raise ValueError("compiled oracle supports n <= 64")
    if max_errors > 8:
        raise ValueError("compiled oracle supports at most 8 errors")
    for i in range(n):
        m[i] = masks[i]
    best_d = __builtin_popcountll(obs)
    if best_d == 0:
        return 0, 0
    partial[0] = 0
    for k in range(1, max_errors + 1):
        if k > n:
            break
        # iterative lexicographic enumeration of k-combinations
        for i in range(k):
            idx[i] = i
            partial[i + 1] = partial[i] | m[i]
        while True:
            d = __builtin_popcountll(partial[k] ^ obs)
            if d < best_d:
                best_d = d
                best_e = 0
                for j in range(k):
                    best_e |= (<uint64_t> 1) << idx[j]
                if d == 0:
                    return best_e, 0
            depth = k - 1
            while depth >= 0 and idx[depth] == n - k + depth:
                depth -= 1
            if depth < 0:
                break
            idx[depth] += 1
            partial[depth + 1] = partial[depth] | m[idx[depth]]
            for i in range(depth + 1, k):
                idx[i] = idx[i - 1] + 1
                partial[i + 1] = partial[i] | m[idx[i]]
    return best_e, best_d
