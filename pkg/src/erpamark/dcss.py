"""Distinct circular subsum sequences over Z/n.

A distance sequence ``d_1..d_k`` summing to ``n`` is treated as circular. It is
a DCSS when the sums of all contiguous circular runs of length 1..k-1 are
pairwise distinct and nonzero mod n. Equivalently its prefix-sum offsets form
a set whose k(k-1) ordered pairwise differences are distinct and nonzero.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from erpamark import kernels

CANONICAL_DISTANCES = (1, 2, 4, 5, 8, 10, 34)
CANONICAL_OFFSETS = (0, 1, 3, 7, 12, 20, 30)


def _validate(distances: Sequence[int], n: int) -> tuple[int, ...]:
    if n < 1:
        raise ValueError(f"modulus must be positive, got {n}")
    dist = tuple(int(d) for d in distances)
    if not dist:
        raise ValueError("empty distance sequence")
    if any(d < 1 for d in dist):
        raise ValueError(f"distances must be positive: {dist}")
    if sum(dist) != n:
        raise ValueError(f"distances sum to {sum(dist)}, expected {n}")
    return dist


def offsets_from_distances(distances: Sequence[int], n: int = 64) -> tuple[int, ...]:
    dist = _validate(distances, n)
    offs = [0]
    for d in dist[:-1]:
        offs.append(offs[-1] + d)
    return tuple(offs)


def circular_run_sums(distances: Sequence[int], n: int = 64) -> list[int]:
    """Sums mod n of every contiguous circular run of length 1..k-1."""
    dist = _validate(distances, n)
    k = len(dist)
    sums = []
    for start in range(k):
        acc = 0
        for length in range(1, k):
            acc += dist[(start + length - 1) % k]
            sums.append(acc % n)
    return sums


def circular_differences(offsets: Sequence[int], n: int = 64) -> list[int]:
    """All (a - b) mod n over ordered pairs of distinct offset indices."""
    return [(a - b) % n for i, a in enumerate(offsets) for j, b in enumerate(offsets) if i != j]


def is_dcss(distances: Sequence[int], n: int = 64) -> bool:
    sums = circular_run_sums(distances, n)
    return 0 not in sums and len(set(sums)) == len(sums)


def has_distinct_differences(distances: Sequence[int], n: int = 64) -> bool:
    """The offset-difference formulation of :func:`is_dcss`."""
    diffs = circular_differences(offsets_from_distances(distances, n), n)
    return 0 not in diffs and len(set(diffs)) == len(diffs)


def canonical_rotation(distances: Sequence[int]) -> tuple[int, ...]:
    dist = tuple(distances)
    return min(dist[r:] + dist[:r] for r in range(len(dist)))


@dataclass(frozen=True)
class DcssSequence:
    distances: tuple[int, ...]
    n: int = 64
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(int(d) for d in self.distances))
        object.__setattr__(self, "offsets", offsets_from_distances(self.distances, self.n))

    @classmethod
    def canonical(cls) -> "DcssSequence":
        return cls(CANONICAL_DISTANCES, 64)

    @classmethod
    def from_offsets(cls, offsets: Sequence[int], n: int = 64) -> "DcssSequence":
        offs = list(offsets)
        if not offs or offs[0] != 0 or any(b <= a for a, b in zip(offs, offs[1:])) or offs[-1] >= n:
            raise ValueError(f"offsets must ascend from 0 below {n}: {offs}")
        return cls(tuple(b - a for a, b in zip(offs, offs[1:])) + (n - offs[-1],), n)

    @property
    def size(self) -> int:
        return len(self.distances)

    def is_valid(self) -> bool:
        return is_dcss(self.distances, self.n)

    def rotated(self, r: int) -> "DcssSequence":
        r %= self.size
        return DcssSequence(self.distances[r:] + self.distances[:r], self.n)

    def to_line(self) -> str:
        return f"{self.n}: " + ",".join(map(str, self.distances))

    @classmethod
    def from_line(cls, line: str) -> "DcssSequence":
        head, _, tail = line.partition(":")
        if not tail.strip():
            raise ValueError(f"malformed sequence line: {line!r}")
        return cls(tuple(int(t) for t in tail.split(",")), int(head))

    def __str__(self) -> str:
        return self.to_line()


@dataclass
class SearchResult:
    n: int
    size: int
    sequences: list[DcssSequence]
    complete: bool
    # True when max_results cut the enumeration short
    truncated: bool = False
    # largest size shown not to exist, when the search proved it
    excluded_size: int | None = None

    @property
    def maximal(self) -> bool:
        """Whether ``size`` is proven to be the largest DCSS cardinality for n."""
        return self.complete and self.excluded_size == self.size + 1


def search_dcss(
    n: int,
    size: int,
    max_results: int | None = None,
    time_budget: float | None = None,
) -> SearchResult:
    """Enumerate rotation-canonical DCSS of one cardinality, in lexicographic order."""
    if n < 1:
        raise ValueError(f"modulus must be positive, got {n}")
    deadline = None if time_budget is None else time.monotonic() + time_budget
    offs, status = kernels.dcss_enumerate(n, size, max_results, deadline)
    seqs = [DcssSequence.from_offsets(o, n) for o in offs]
    return SearchResult(
        n=n,
        size=size,
        sequences=seqs,
        complete=status != kernels.TIMEOUT,
        truncated=status == kernels.LIMIT,
    )


def search_maximal_dcss(
    n: int,
    max_results: int | None = 16,
    time_budget: float | None = None,
) -> SearchResult:
    """Find the largest DCSS cardinality for modulus n by depth-first search.

    Sizes are tried upward until one is exhausted without a hit. The returned
    result holds up to ``max_results`` sequences of the largest size found.
    ``complete`` is False when the budget ran out before the next size was
    excluded; in that case the reported size is a lower bound only.
    """
    if n < 1:
        raise ValueError(f"modulus must be positive, got {n}")
    deadline = None if time_budget is None else time.monotonic() + time_budget
    best = SearchResult(n=n, size=1, sequences=[DcssSequence((n,), n)], complete=True)
    size = 2
    while True:
        remaining = None if deadline is None else max(deadline - time.monotonic(), 0.0)
        # existence probe first, then the bounded listing
        probe = search_dcss(n, size, max_results=1, time_budget=remaining)
        if not probe.complete:
            best.complete = False
            return best
        if not probe.sequences:
            best.excluded_size = size
            return best
        remaining = None if deadline is None else max(deadline - time.monotonic(), 0.0)
        listing = search_dcss(n, size, max_results=max_results, time_budget=remaining)
        best = listing
        if not listing.complete:
            return best
        size += 1
