"""Watermark channels: embed/extract 64-bit payloads per image patch.

A :class:`ChannelModel` is immutable configuration. ``model.open(seed)`` gives a
session that owns all mutable state of one pipeline run (the simulated
channel's side records, the distortion generator). Any object implementing
:class:`PatchChannel` can stand in for a real deep watermarking model.
"""
from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from erpamark.bits import BitVector

PAYLOAD_BITS = 64
MIN_PATCH = 8
# green channel carries the LSB payload
LSB_PLANE = 1


class NoWatermarkError(LookupError):
    """Extraction from a patch that never had a payload embedded."""


@dataclass(frozen=True, eq=False)
class ImagePatch:
    pixels: np.ndarray
    origin: tuple[int, int]

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"patch must be H x W x 3, got shape {px.shape}")
        if px.shape[0] < MIN_PATCH or px.shape[1] < MIN_PATCH:
            raise ValueError(f"patch must be at least {MIN_PATCH}x{MIN_PATCH}, got {px.shape[:2]}")
        if px.dtype != np.uint8:
            raise ValueError(f"patch pixels must be uint8, got {px.dtype}")
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]

    def with_pixels(self, pixels: np.ndarray) -> "ImagePatch":
        return ImagePatch(pixels, self.origin)


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "lsb"
    intrinsic_error_rate: float = 0.0
    distortion_rate: float = 0.0
    seed: int = 0
    # coefficient of variation of the per-patch intrinsic rate (simulated only)
    rate_spread: float = 0.0

    def __post_init__(self):
        if self.kind not in ("lsb", "simulated"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        for name in ("intrinsic_error_rate", "distortion_rate"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.rate_spread < 0:
            raise ValueError("rate_spread must be >= 0")
        if self.kind == "lsb" and (self.intrinsic_error_rate or self.distortion_rate or self.rate_spread):
            raise ValueError("the lsb channel is exact: its rates must be 0")

    def open(self, seed: int = 0) -> "PatchChannel":
        if self.kind == "lsb":
            return LsbChannel(self, seed)
        return SimulatedChannel(self, seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelModel":
        known = {"kind", "intrinsic_error_rate", "distortion_rate", "seed", "rate_spread"}
        return cls(**{k: v for k, v in d.items() if k in known})

    def patch_rate(self, gen: np.random.Generator) -> float:
        r = self.intrinsic_error_rate
        if self.rate_spread > 0 and r > 0:
            shape = 1.0 / self.rate_spread ** 2
            r *= gen.gamma(shape, 1.0 / shape)
        return min(r, 0.5)

    def intrinsic_pattern(self, origin: tuple[int, int], payload: BitVector) -> int:
        """Deterministic clean-decode error word for a payload at a patch origin.

        Keyed pseudorandom function of (seed, origin, payload): a per-patch
        rate is drawn first (mean ``intrinsic_error_rate``), then each bit is
        set independently at that rate.
        """
        if self.intrinsic_error_rate == 0:
            return 0
        key = (self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        msg = b"%d,%d:" % origin + payload.value.to_bytes(8, "little")
        digest = hashlib.blake2b(msg, key=key, digest_size=32).digest()
        gen = np.random.default_rng(int.from_bytes(digest, "little"))
        rate = self.patch_rate(gen)
        return BitVector.from_bits(gen.random(PAYLOAD_BITS) < rate).value

    def sample_error_masks(self, rng: np.random.Generator, count: int, distortion: float | None = None) -> np.ndarray:
        """Draw ``count`` error rows distributed like intrinsic errors then distortion.

        Vectorized stand-in for many :meth:`intrinsic_pattern` calls on fresh
        payloads; used to build training data matched to this channel.
        """
        strength = self.distortion_rate if distortion is None else distortion
        rates = np.full(count, self.intrinsic_error_rate)
        if self.rate_spread > 0 and self.intrinsic_error_rate > 0:
            shape = 1.0 / self.rate_spread ** 2
            rates = np.minimum(rates * rng.gamma(shape, 1.0 / shape, size=count), 0.5)
        u = rng.random((count, 2 * PAYLOAD_BITS))
        intrinsic = u[:, :PAYLOAD_BITS] < rates[:, None]
        flips = u[:, PAYLOAD_BITS:] < strength
        return (intrinsic ^ flips).astype(np.uint8)


class PatchChannel(ABC):
    """One pipeline run's view of a watermark channel."""

    def __init__(self, model: ChannelModel, seed: int = 0):
        self.model = model
        self.seed = seed
        self.rng = np.random.default_rng(np.random.SeedSequence([model.seed & 0xFFFFFFFFFFFFFFFF, seed, 0xD157]))

    @abstractmethod
    def embed(self, patch: ImagePatch, payload: BitVector) -> ImagePatch: ...

    @abstractmethod
    def extract(self, patch: ImagePatch) -> BitVector: ...

    @abstractmethod
    def distort(self, patches: Iterable[ImagePatch], strength: float | None = None) -> list[ImagePatch]: ...

    def state_dict(self) -> dict:
        return {"format_version": 1, "model": self.model.to_dict(), "seed": self.seed}

    def save_state(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.state_dict(), indent=1) + "\n")

    @staticmethod
    def load_state(path: str | Path) -> "PatchChannel":
        d = json.loads(Path(path).read_text())
        if d.get("format_version") != 1:
            raise ValueError(f"unsupported channel state format_version {d.get('format_version')!r}")
        ch = ChannelModel.from_dict(d["model"]).open(d.get("seed", 0))
        if isinstance(ch, SimulatedChannel):
            ch.records = {
                (r["origin"][0], r["origin"][1]): _Record(int(r["payload"], 16), int(r["intrinsic"], 16), int(r["distortion"], 16))
                for r in d.get("records", [])
            }
        return ch


def _check_payload(payload: BitVector) -> None:
    if payload.length != PAYLOAD_BITS:
        raise ValueError(f"payload must be {PAYLOAD_BITS} bits, got {payload.length}")


def _strength(model: ChannelModel, strength: float | None) -> float:
    s = model.distortion_rate if strength is None else strength
    if not 0 <= s < 1:
        raise ValueError(f"distortion strength must be in [0, 1), got {s}")
    return s


class LsbChannel(PatchChannel):
    """Bit j lives in the least significant bit of the green value of pixel (j // 8, j % 8)."""

    def embed(self, patch: ImagePatch, payload: BitVector) -> ImagePatch:
        _check_payload(payload)
        px = patch.pixels.copy()
        bits = payload.to_array().reshape(8, 8)
        plane = px[:8, :8, LSB_PLANE]
        px[:8, :8, LSB_PLANE] = (plane & 0xFE) | bits
        return patch.with_pixels(px)

    def extract(self, patch: ImagePatch) -> BitVector:
        return BitVector.from_bits((patch.pixels[:8, :8, LSB_PLANE] & 1).ravel())

    def distort(self, patches: Iterable[ImagePatch], strength: float | None = None) -> list[ImagePatch]:
        s = _strength(self.model, strength)
        out = []
        for patch in patches:
            flips = (self.rng.random((8, 8)) < s).astype(np.uint8)
            px = patch.pixels.copy()
            px[:8, :8, LSB_PLANE] ^= flips
            out.append(patch.with_pixels(px))
        return out


@dataclass
class _Record:
    payload: int
    intrinsic: int
    distortion: int = 0


class SimulatedChannel(PatchChannel):
    """Side-record channel with deterministic intrinsic errors and seeded distortion flips.

    Pixels pass through unchanged; payloads are remembered per patch origin.
    """

    def __init__(self, model: ChannelModel, seed: int = 0):
        super().__init__(model, seed)
        self.records: dict[tuple[int, int], _Record] = {}

    def embed(self, patch: ImagePatch, payload: BitVector) -> ImagePatch:
        _check_payload(payload)
        self.records[patch.origin] = _Record(payload.value, self.model.intrinsic_pattern(patch.origin, payload))
        return patch

    def extract(self, patch: ImagePatch) -> BitVector:
        rec = self.records.get(patch.origin)
        if rec is None:
            raise NoWatermarkError(f"no watermark at patch origin {patch.origin}")
        return BitVector(rec.payload ^ rec.intrinsic ^ rec.distortion, PAYLOAD_BITS)

    def distort(self, patches: Iterable[ImagePatch], strength: float | None = None) -> list[ImagePatch]:
        s = _strength(self.model, strength)
        patches = list(patches)
        for patch in patches:
            rec = self.records.get(patch.origin)
            if rec is None:
                continue
            flips = BitVector.from_bits(self.rng.random(PAYLOAD_BITS) < s).value
            rec.distortion ^= flips
        return patches

    def state_dict(self) -> dict:
        d = super().state_dict()
        d["records"] = [
            {
                "origin": list(origin),
                "payload": format(r.payload, "016x"),
                "intrinsic": format(r.intrinsic, "016x"),
                "distortion": format(r.distortion, "016x"),
            }
            for origin, r in sorted(self.records.items())
        ]
        return d


def load_channel_config(path: str | Path) -> ChannelModel:
    return ChannelModel.from_dict(json.loads(Path(path).read_text()))
