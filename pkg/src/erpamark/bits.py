"""Fixed-length bit vectors backed by Python integers.

Bit ``i`` is ``(value >> i) & 1``. Hex serialization writes ``length // 4``
digits, most significant first, so bit 0 is the low bit of the last digit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class BitVector:
    value: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"length must be positive, got {self.length}")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> "BitVector":
        return cls((1 << length) - 1, length)

    @classmethod
    def from_positions(cls, positions: Iterable[int], length: int) -> "BitVector":
        value = 0
        for pos in positions:
            if not 0 <= pos < length:
                raise IndexError(f"bit position {pos} out of range for length {length}")
            value |= 1 << pos
        return cls(value, length)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "BitVector":
        arr = np.asarray(bits).astype(np.uint8).ravel()
        if arr.size == 0:
            raise ValueError("empty bit sequence")
        if arr.max(initial=0) > 1:
            raise ValueError("bits must be 0 or 1")
        # packbits is big-endian per byte; little order keeps bit i at weight 2**i
        packed = np.packbits(arr, bitorder="little").tobytes()
        return cls(int.from_bytes(packed, "little"), int(arr.size))

    @classmethod
    def from_hex(cls, text: str, length: int | None = None) -> "BitVector":
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if length is None:
            length = 4 * len(text)
        elif len(text) != -(-length // 4):
            raise ValueError(f"expected {-(-length // 4)} hex digits for {length} bits, got {len(text)}")
        return cls(int(text, 16), length)

    @classmethod
    def concat(cls, parts: Sequence["BitVector"]) -> "BitVector":
        """Join vectors so that ``parts[0]`` occupies the lowest bit positions."""
        value, shift = 0, 0
        for part in parts:
            value |= part.value << shift
            shift += part.length
        return cls(value, shift)

    def to_hex(self) -> str:
        return format(self.value, f"0{-(-self.length // 4)}x")

    def to_array(self) -> np.ndarray:
        raw = self.value.to_bytes(-(-self.length // 8), "little")
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[: self.length]

    def positions(self) -> list[int]:
        out, v, i = [], self.value, 0
        while v:
            if v & 1:
                out.append(i)
            v >>= 1
            i += 1
        return out

    def popcount(self) -> int:
        return self.value.bit_count()

    def chunks(self, size: int) -> list["BitVector"]:
        if self.length % size:
            raise ValueError(f"length {self.length} is not a multiple of {size}")
        mask = (1 << size) - 1
        return [BitVector((self.value >> (i * size)) & mask, size) for i in range(self.length // size)]

    def rotate(self, t: int) -> "BitVector":
        """Circular shift towards higher positions: bit i moves to (i + t) mod length."""
        n = self.length
        t %= n
        mask = (1 << n) - 1
        return BitVector(((self.value << t) | (self.value >> (n - t))) & mask, n)

    def _check(self, other: "BitVector") -> None:
        if not isinstance(other, BitVector):
            raise TypeError(f"expected BitVector, got {type(other).__name__}")
        if other.length != self.length:
            raise ValueError(f"length mismatch: {self.length} vs {other.length}")

    def __xor__(self, other: "BitVector") -> "BitVector":
        self._check(other)
        return BitVector(self.value ^ other.value, self.length)

    def __or__(self, other: "BitVector") -> "BitVector":
        self._check(other)
        return BitVector(self.value | other.value, self.length)

    def __and__(self, other: "BitVector") -> "BitVector":
        self._check(other)
        return BitVector(self.value & other.value, self.length)

    def __invert__(self) -> "BitVector":
        return BitVector(self.value ^ ((1 << self.length) - 1), self.length)

    def __getitem__(self, i: int) -> int:
        if not -self.length <= i < self.length:
            raise IndexError(i)
        return (self.value >> (i % self.length)) & 1

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return self.to_hex()


def hamming_distance(a: BitVector, b: BitVector) -> int:
    return (a ^ b).popcount()


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """Pack an (N, 64) 0/1 array into N uint64 words, column i at weight 2**i."""
    rows = np.ascontiguousarray(rows, dtype=np.uint8)
    if rows.ndim != 2 or rows.shape[1] != 64:
        raise ValueError(f"expected shape (N, 64), got {rows.shape}")
    return np.packbits(rows, axis=1, bitorder="little").view("<u8").ravel()


def unpack_words(words: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_rows`."""
    words = np.ascontiguousarray(words, dtype="<u8").reshape(-1, 1)
    return np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
