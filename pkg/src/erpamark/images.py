"""PNG I/O and a seeded procedural image corpus."""
from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_png(path: str | Path, image: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def _smooth_noise(rng: np.random.Generator, size: int, cells: int) -> np.ndarray:
    coarse = rng.random((cells + 1, cells + 1))
    t = np.linspace(0, cells, size, endpoint=False)
    i = t.astype(int)
    f = t - i
    f = f * f * (3 - 2 * f)
    top = coarse[i][:, i] * (1 - f)[None, :] + coarse[i][:, i + 1] * f[None, :]
    bot = coarse[i + 1][:, i] * (1 - f)[None, :] + coarse[i + 1][:, i + 1] * f[None, :]
    return top * (1 - f)[:, None] + bot * f[:, None]


def synthetic_image(seed: int, size: int = 256) -> np.ndarray:
    """Gradient background, a handful of filled shapes, and a noise texture."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A6E]))
    yy, xx = np.mgrid[0:size, 0:size] / size
    angle = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(angle) * xx + np.sin(angle) * yy
    ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-9)
    c0, c1 = rng.uniform(0, 255, 3), rng.uniform(0, 255, 3)
    img = c0 + ramp[..., None] * (c1 - c0)

    for _ in range(rng.integers(3, 9)):
        color = rng.uniform(0, 255, 3)
        alpha = rng.uniform(0.5, 1.0)
        cy, cx = rng.uniform(0, 1, 2)
        ry, rx = rng.uniform(0.05, 0.35, 2)
        if rng.random() < 0.5:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        img[mask] = (1 - alpha) * img[mask] + alpha * color

    texture = _smooth_noise(rng, size, int(rng.integers(4, 16))) - 0.5
    img += rng.uniform(10, 60) * texture[..., None]
    img += rng.normal(0, rng.uniform(0.5, 4.0), img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synthetic_corpus(count: int, size: int = 256, seed: int = 0) -> Iterator[np.ndarray]:
    for i in range(count):
        yield synthetic_image(seed * 1_000_003 + i, size)


def load_corpus(directory: str | Path) -> list[Path]:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no PNG files in {directory}")
    return paths
