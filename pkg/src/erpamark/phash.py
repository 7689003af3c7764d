"""64-bit DCT perceptual hash.

Stages: BT.601 luma, bilinear resize to 32x32 (half-pixel centers, clamped),
2D DCT-II, top-left 8x8 block, threshold against the median of the 63 AC
coefficients. The DC bit is always 0.

Every floating-point reduction runs in a fixed order so hashes are bit-exact
across runs and platforms: interpolation is ``a + w * (b - a)`` per axis (rows
first), and the DCT accumulates in ascending input index, rows then columns,
one elementwise multiply-add at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from erpamark.bits import BitVector

RESIZE = 32
BLOCK = 8


@dataclass(frozen=True)
class PerceptualHash:
    bits: BitVector

    def __post_init__(self):
        if self.bits.length != 64:
            raise ValueError("perceptual hash must be 64 bits")

    @property
    def value(self) -> int:
        return self.bits.value

    def to_bytes(self) -> bytes:
        return self.bits.value.to_bytes(8, "big")

    def to_hex(self) -> str:
        return self.bits.to_hex()

    @classmethod
    def from_hex(cls, text: str) -> "PerceptualHash":
        return cls(BitVector.from_hex(text, 64))

    def __str__(self) -> str:
        return self.to_hex()


def _cos_table(size: int, rows: int) -> np.ndarray:
    return np.array(
        [[math.cos(math.pi * (2 * x + 1) * u / (2 * size)) for x in range(size)] for u in range(rows)],
        dtype=np.float64,
    )


_COS = _cos_table(RESIZE, BLOCK)


def luma(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] < 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {img.shape}")
    rgb = img[:, :, :3].astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def _axis_weights(src: int, dst: int):
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def resize_bilinear(gray: np.ndarray, size: int = RESIZE) -> np.ndarray:
    h, w = gray.shape
    r0, r1, wr = _axis_weights(h, size)
    c0, c1, wc = _axis_weights(w, size)
    top = gray[r0]
    rows = top + wr[:, None] * (gray[r1] - top)
    left = rows[:, c0]
    return left + wc[None, :] * (rows[:, c1] - left)


def dct_block(x: np.ndarray, block: int = BLOCK) -> np.ndarray:
    """Unnormalized DCT-II coefficients D[u, v] for u, v < block.

    D[u, v] = sum_x sum_y cos(pi (2x+1) u / 2N) cos(pi (2y+1) v / 2N) X[x, y]
    """
    n = x.shape[0]
    cos = _COS if (n, block) == (RESIZE, BLOCK) else _cos_table(n, block)
    tmp = np.zeros((block, x.shape[1]))
    for i in range(n):
        tmp += cos[:, i, None] * x[i, None, :]
    out = np.zeros((block, block))
    for j in range(x.shape[1]):
        out += tmp[:, j, None] * cos[None, :, j]
    return out


def phash(image: np.ndarray) -> PerceptualHash:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] < 8 or img.shape[1] < 8:
        raise ValueError(f"image must be at least 8x8 with 3 channels, got shape {img.shape}")
    small = resize_bilinear(luma(img))
    # Removing the exact mean only moves the DC term, whose bit is fixed anyway;
    # it keeps flat images at exactly zero AC energy instead of rounding residue.
    small = small - math.fsum(small.ravel()) / small.size
    coeffs = dct_block(small).ravel()
    ac = np.sort(coeffs[1:])
    median = ac[(ac.size - 1) // 2]
    bits = coeffs > median
    bits[0] = False
    return PerceptualHash(BitVector.from_bits(bits.astype(np.uint8)))


def hamming(a: PerceptualHash, b: PerceptualHash) -> int:
    return (a.bits ^ b.bits).popcount()
