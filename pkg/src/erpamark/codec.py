"""Error painting: error vectors, DCSS shifts, OR-aggregated painting, XOR correction."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from erpamark import kernels
from erpamark.bits import BitVector
from erpamark.dcss import CANONICAL_OFFSETS, DcssSequence

# C(64, 4) ~ 635k candidates is the largest exhaustive search we allow
MAX_ORACLE_ERRORS = 4


@dataclass(frozen=True)
class PaintingScheme:
    offsets: tuple[int, ...]
    n: int = 64
    name: str = "dcss"

    def __post_init__(self):
        offs = tuple(int(k) for k in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if not offs or offs[0] != 0:
            raise ValueError(f"offsets must start with 0: {offs}")
        if len(set(offs)) != len(offs) or any(not 0 <= k < self.n for k in offs):
            raise ValueError(f"offsets must be distinct values in [0, {self.n}): {offs}")

    @classmethod
    def dcss(cls, length: int = 7, sequence: DcssSequence | None = None) -> "PaintingScheme":
        """First ``length`` offsets of a DCSS (the canonical 7-element one by default)."""
        offs = sequence.offsets if sequence is not None else CANONICAL_OFFSETS
        n = sequence.n if sequence is not None else 64
        if not 1 <= length <= len(offs):
            raise ValueError(f"length must be in [1, {len(offs)}], got {length}")
        return cls(tuple(offs[:length]), n, "dcss")

    @classmethod
    def nearby(cls, length: int = 7, n: int = 64) -> "PaintingScheme":
        return cls(tuple(range(length)), n, "nearby")

    @classmethod
    def from_spec(cls, kind: str, length: int = 7) -> "PaintingScheme":
        if kind == "dcss":
            return cls.dcss(length)
        if kind == "nearby":
            return cls.nearby(length)
        raise ValueError(f"unknown scheme kind {kind!r}")

    @property
    def length(self) -> int:
        return len(self.offsets)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        """Painted word of a lone error at each position."""
        out = []
        for i in range(self.n):
            m = 0
            for k in self.offsets:
                m |= 1 << ((i + k) % self.n)
            out.append(m)
        return tuple(out)

    @cached_property
    def matrix(self) -> np.ndarray:
        """0/1 matrix with row i the indicator of shift(S, i)."""
        mat = np.zeros((self.n, self.n), dtype=np.uint8)
        for i in range(self.n):
            for k in self.offsets:
                mat[i, (i + k) % self.n] = 1
        mat.setflags(write=False)
        return mat

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "offsets": list(self.offsets)}

    @classmethod
    def from_dict(cls, d: dict) -> "PaintingScheme":
        return cls(tuple(d["offsets"]), int(d.get("n", 64)), d.get("name", "dcss"))


def error_vector(m: BitVector, m_tilde: BitVector) -> BitVector:
    return m ^ m_tilde


def correct(m_tilde: BitVector, e_hat: BitVector) -> BitVector:
    return m_tilde ^ e_hat


def shift_positions(i: int, scheme: PaintingScheme) -> set[int]:
    if not 0 <= i < scheme.n:
        raise IndexError(f"bit index {i} out of range [0, {scheme.n})")
    return {(i + k) % scheme.n for k in scheme.offsets}


def paint(e: BitVector, scheme: PaintingScheme) -> BitVector:
    if e.length != scheme.n:
        raise ValueError(f"error vector has {e.length} bits, scheme expects {scheme.n}")
    masks = scheme.masks
    out, v, i = 0, e.value, 0
    while v:
        if v & 1:
            out |= masks[i]
        v >>= 1
        i += 1
    return BitVector(out, scheme.n)


def paint_batch(errors: np.ndarray, scheme: PaintingScheme) -> np.ndarray:
    """Paint each row of an (N, n) 0/1 array; returns uint8 of the same shape."""
    errors = np.asarray(errors)
    if errors.ndim != 2 or errors.shape[1] != scheme.n:
        raise ValueError(f"expected shape (N, {scheme.n}), got {errors.shape}")
    counts = errors.astype(np.int32) @ scheme.matrix.astype(np.int32)
    return (counts > 0).astype(np.uint8)


def oracle_decode(observed: BitVector, scheme: PaintingScheme, max_errors: int = 2) -> BitVector:
    """Maximum-likelihood decode by exhaustive search over error vectors.

    Minimizes the Hamming distance between the painting of a candidate and the
    observation over all candidates with at most ``max_errors`` set bits. Ties
    go to the smaller popcount, then to the lexicographically first sorted
    position tuple.
    """
    if observed.length != scheme.n:
        raise ValueError(f"observation has {observed.length} bits, scheme expects {scheme.n}")
    if not 0 <= max_errors <= MAX_ORACLE_ERRORS:
        raise ValueError(f"max_errors must be in [0, {MAX_ORACLE_ERRORS}], got {max_errors}")
    if max_errors == 0:
        return BitVector.zeros(scheme.n)
    search = kernels.oracle_search
    if scheme.n > 64:
        from erpamark import _pykernels

        search = _pykernels.oracle_search
    e, _ = search(observed.value, scheme.masks, max_errors)
    return BitVector(int(e), scheme.n)

