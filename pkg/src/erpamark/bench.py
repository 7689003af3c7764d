"""Experiment harness for the decoder ablations and the end-to-end Z.B.I.R runs.

Every random choice derives from ``(config.seed, task tag, task index)``, so
tables are identical for any thread count. Decoders for the accuracy tables
share their training stream and evaluation stream across painting schemes at
a given ``p`` (common random numbers), which keeps scheme comparisons paired.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from erpamark.channel import ChannelModel
from erpamark.codec import PaintingScheme, paint_batch
from erpamark.decoder import (
    LinearDecoderModel,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    load_model,
    save_model,
    train,
)
from erpamark.framework import (
    PatchAssignment,
    PatchGrid,
    crop,
    embed_signature,
    extract_and_verify,
    extract_payload,
    recompose,
)
from erpamark.images import load_corpus, read_png, synthetic_image
from erpamark.signature import KeyPair, keygen

log = logging.getLogger(__name__)

RESULT_FORMAT_VERSION = 1
DEFAULT_P_GRID = (0.01, 0.02, 0.03, 0.05, 0.1, 0.15)
TRAIN_PS = (0.01, 0.05, 0.07, 0.1)
EXPERIMENTS = ("painting", "permutation", "traindist", "zbir", "simulate-zbir")

# Simulated channel calibrated so that raw BER over 2048 payload bits sits near
# 0.5%, with patch rates spread enough that a few images take most errors.
DEFAULT_CHANNEL = {
    "kind": "simulated",
    "intrinsic_error_rate": 0.005,
    "distortion_rate": 0.00005,
    "seed": 0,
    "rate_spread": 3.0,
}

# task tags for seed derivation
_TRAIN, _EVAL, _IMAGE, _CHANNEL, _KEY = 1, 2, 3, 4, 5


def task_seed(seed: int, *parts: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *parts]).generate_state(1, np.uint64)[0])


def wilson_interval(successes: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("total must be positive")
    phat = successes / total
    denom = 1 + z * z / total
    centre = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "painting"
    # painting density / permutation tables
    lengths: tuple[int, ...] = (2, 3, 4, 5, 6, 7)
    scheme: str = "dcss"
    scheme_length: int = 7
    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    trials: int = 100_000
    steps: int = 50_000
    learning_rate: float = 1e-2
    batch_size: int = 64
    # end-to-end runs
    corpus: str | None = None
    corpus_seed: int = 0
    images: int = 500
    image_size: int = 128
    grid: int = 8
    assignment: str = "contiguous"
    channel: dict = field(default_factory=lambda: dict(DEFAULT_CHANNEL))
    decoder_p: float = 0.07
    train_ps: tuple[float, ...] = TRAIN_PS
    traindist_steps: int = 400_000
    strengths: tuple[float, ...] = (0.0, 0.0001, 0.0002, 0.0005, 0.001, 0.002)
    seed: int = 0
    output: str | None = None
    model_dir: str | None = None

    def __post_init__(self):
        for name in ("lengths", "p_grid", "train_ps", "strengths"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.trials < 1 or self.images < 1:
            raise ValueError("trials and images must be >= 1")
        for p in self.p_grid + self.train_ps + (self.decoder_p,):
            if not 0 < p < 1:
                raise ValueError(f"every p must be in (0, 1), got {p}")
        if self.experiment == "painting" and any(not 2 <= L <= 7 for L in self.lengths):
            raise ValueError("painting density lengths must lie in [2, 7]")
        if self.scheme not in ("dcss", "nearby"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        ChannelModel.from_dict(self.channel)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        if "channel" in d:
            d["channel"] = {**DEFAULT_CHANNEL, **d["channel"]}
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        d = json.loads(Path(path).read_text())
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Digest of every field that can change the numbers (output paths excluded)."""
        d = self.to_dict()
        d.pop("output")
        d.pop("model_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Cell:
    value: float | None
    successes: int | None = None
    total: int | None = None
    error: str | None = None

    @property
    def interval(self) -> tuple[float, float] | None:
        if self.successes is None or not self.total:
            return None
        return wilson_interval(self.successes, self.total)

    def to_dict(self) -> dict:
        d = {"value": self.value}
        if self.total is not None:
            d["successes"] = self.successes
            d["total"] = self.total
            d["ci95"] = list(self.interval)
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class BenchResult:
    experiment: str
    config: ExperimentConfig
    columns: list[str]
    rows: list[tuple[str, list[Cell]]]
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    digits: int = 4

    def cell(self, row: str, column: str) -> Cell:
        for label, cells in self.rows:
            if label == row:
                return cells[self.columns.index(column)]
        raise KeyError(row)

    def value(self, row: str, column: str) -> float:
        return self.cell(row, column).value

    def to_dict(self) -> dict:
        return {
            "format_version": RESULT_FORMAT_VERSION,
            "experiment": self.experiment,
            "config_hash": self.config.config_hash(),
            "config": {k: v for k, v in self.config.to_dict().items() if k not in ("output", "model_dir")},
            "columns": self.columns,
            "rows": [{"label": label, "cells": [c.to_dict() for c in cells]} for label, cells in self.rows],
            "notes": self.notes,
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"

    def to_text(self) -> str:
        fmt = f"{{:.{self.digits}f}}"

        def show(c: Cell) -> str:
            if c.error:
                return "failed"
            if c.value is None:
                return "-"
            s = fmt.format(c.value)
            iv = c.interval
            if iv is not None:
                s += f" [{fmt.format(iv[0])}, {fmt.format(iv[1])}]"
            return s

        header = [""] + self.columns
        body = [[label] + [show(c) for c in cells] for label, cells in self.rows]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = [f"# {self.experiment}  config {self.config.config_hash()}  seed {self.config.seed}"]
        for r in [header] + body:
            lines.append("  ".join(s.ljust(w) if i == 0 else s.rjust(w) for i, (s, w) in enumerate(zip(r, widths))).rstrip())
        lines.extend(f"# {n}" for n in self.notes)
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


# decoders trained during this process, keyed by their full description
_MODEL_CACHE: dict[str, LinearDecoderModel] = {}


def _train_cached(cfg: TrainConfig, model_dir: str | None, sampler=None, tag: str = "bernoulli") -> LinearDecoderModel:
    key = json.dumps({"train": cfg.to_dict(), "sampler": tag}, sort_keys=True)
    model = _MODEL_CACHE.get(key)
    if model is not None:
        return model
    path = None
    if model_dir:
        digest = hashlib.sha256(key.encode()).hexdigest()[:20]
        path = Path(model_dir) / f"decoder-{digest}.json"
        if path.exists():
            model = load_model(path)
    if model is None:
        model = train(cfg, sampler=sampler)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            save_model(model, path)
    _MODEL_CACHE[key] = model
    return model


def clear_model_cache() -> None:
    _MODEL_CACHE.clear()


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _accuracy_table(config: ExperimentConfig, schemes: list[tuple[str, PaintingScheme]], threads: int) -> list[tuple[str, list[Cell]]]:
    tasks = [(label, scheme, pi, p) for label, scheme in schemes for pi, p in enumerate(config.p_grid)]

    def run(task):
        label, scheme, pi, p = task
        cfg = TrainConfig(
            p=p,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            steps=config.steps,
            seed=task_seed(config.seed, _TRAIN, pi),
            scheme=scheme,
        )
        try:
            model = _train_cached(cfg, config.model_dir)
        except TrainingDiverged as exc:
            log.warning("cell %s p=%s: %s", label, p, exc)
            return Cell(None, error=str(exc))
        res = evaluate(model, p, config.trials, seed=task_seed(config.seed, _EVAL, pi))
        return Cell(res.bit_accuracy, res.correct_bits, res.bits)

    cells = _map(run, tasks, threads)
    k = len(config.p_grid)
    return [(label, cells[i * k:(i + 1) * k]) for i, (label, _) in enumerate(schemes)]


def _p_columns(ps: Sequence[float]) -> list[str]:
    return [f"p={p:g}" for p in ps]


def bench_painting_density(config: ExperimentConfig, threads: int = 1) -> BenchResult:
    """Bit accuracy of the trained decoder for each painting length L and rate p."""
    schemes = [(f"L={L}", PaintingScheme.dcss(L)) for L in config.lengths]
    rows = _accuracy_table(config, schemes, threads)
    return BenchResult(
        "painting",
        config,
        _p_columns(config.p_grid),
        rows,
        notes=[f"bit accuracy over {config.trials} trials per cell, 95% Wilson intervals in brackets"],
    )


def bench_permutation(config: ExperimentConfig, threads: int = 1) -> BenchResult:
    """DCSS against adjacent-offset painting at equal length."""
    L = config.scheme_length
    schemes = [("DCSS", PaintingScheme.dcss(L)), ("NearBy", PaintingScheme.nearby(L))]
    rows = _accuracy_table(config, schemes, threads)
    return BenchResult(
        "permutation",
        config,
        _p_columns(config.p_grid),
        rows,
        notes=[f"L={L}; bit accuracy over {config.trials} trials per cell"],
    )


def _corpus_image(config: ExperimentConfig, index: int, paths: list[Path] | None) -> np.ndarray:
    if paths is None:
        return synthetic_image(task_seed(config.corpus_seed, _IMAGE, index), config.image_size)
    img = read_png(paths[index % len(paths)])
    # trim to a multiple of the grid
    h = img.shape[0] - img.shape[0] % config.grid
    w = img.shape[1] - img.shape[1] % config.grid
    return img[:h, :w]


def _corpus_paths(config: ExperimentConfig) -> list[Path] | None:
    return load_corpus(config.corpus) if config.corpus else None


def _scheme(config: ExperimentConfig) -> PaintingScheme:
    return PaintingScheme.from_spec(config.scheme, config.scheme_length)


def _bench_key(config: ExperimentConfig) -> KeyPair:
    return keygen(seed=task_seed(config.seed, _KEY) & 0xFFFFFFFF)


@dataclass
class ImageOutcome:
    raw_ber: float
    corrected_ber: float
    raw_exact: bool
    corrected_exact: bool
    verified: bool
    phash_stable: bool


def run_pipeline(
    config: ExperimentConfig,
    decoder: LinearDecoderModel,
    strength: float | None = None,
    threads: int = 1,
    key: KeyPair | None = None,
) -> list[ImageOutcome]:
    """Sign, embed, distort, extract and verify every corpus image.

    The ERPA-off reading is the raw A-patch readout of the same run, so both
    modes see the same payload and the same distortion draws.
    """
    key = key or _bench_key(config)
    model = ChannelModel.from_dict(config.channel)
    grid = PatchGrid.square(config.grid)
    assignment = PatchAssignment.named(config.assignment, grid)
    scheme = decoder.scheme
    paths = _corpus_paths(config)

    def one(i: int) -> ImageOutcome:
        img = _corpus_image(config, i, paths)
        session = model.open(task_seed(config.seed, _CHANNEL, i))
        info = embed_signature(img, key.secret, session, scheme, grid, assignment)
        received = recompose(session.distort(crop(info.image, grid), strength), grid)
        rep = extract_and_verify(received, key.public, session, decoder, grid, assignment, truth=info.signature)
        return ImageOutcome(rep.raw_ber, rep.corrected_ber, rep.raw_exact, rep.corrected_exact, rep.verified, info.phash_stable)

    return _map(one, list(range(config.images)), threads)


def _zbir_rows(outcomes: list[ImageOutcome]) -> tuple[list[str], list[tuple[str, list[Cell]]], dict]:
    n = len(outcomes)
    bits = 2048 * n
    raw_err = sum(round(o.raw_ber * 2048) for o in outcomes)
    cor_err = sum(round(o.corrected_ber * 2048) for o in outcomes)
    raw_ok = sum(o.raw_exact for o in outcomes)
    cor_ok = sum(o.corrected_exact for o in outcomes)
    ver = sum(o.verified for o in outcomes)
    with_errors = [o for o in outcomes if o.raw_ber > 0]
    better = sum(o.corrected_ber < o.raw_ber for o in with_errors)
    columns = ["Z.B.I.R", "BER", "verified"]
    rows = [
        ("ERPA off", [Cell(raw_ok / n, raw_ok, n), Cell(raw_err / bits, raw_err, bits), Cell(None)]),
        ("ERPA on", [Cell(cor_ok / n, cor_ok, n), Cell(cor_err / bits, cor_err, bits), Cell(ver / n, ver, n)]),
    ]
    extra = {
        "images": n,
        "images_with_raw_errors": len(with_errors),
        "corrected_better": better,
        "corrected_better_fraction": better / len(with_errors) if with_errors else None,
        "phash_stable": sum(o.phash_stable for o in outcomes),
    }
    return columns, rows, extra


def _decoder_for(config: ExperimentConfig, p: float, steps: int | None = None) -> LinearDecoderModel:
    cfg = TrainConfig(
        p=p,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        steps=config.steps if steps is None else steps,
        seed=task_seed(config.seed, _TRAIN, 1000),
        scheme=_scheme(config),
    )
    return _train_cached(cfg, config.model_dir)


def bench_zbir(config: ExperimentConfig, threads: int = 1, decoder: LinearDecoderModel | None = None) -> BenchResult:
    """End-to-end Z.B.I.R and BER with and without error painting."""
    decoder = decoder or _decoder_for(config, config.decoder_p)
    outcomes = run_pipeline(config, decoder, threads=threads)
    columns, rows, extra = _zbir_rows(outcomes)
    frac = extra["corrected_better_fraction"]
    notes = [
        f"{config.images} images, {config.grid}x{config.grid} grid, channel {config.channel['kind']}",
        "ERPA off reads the same A patches without correction",
    ]
    if frac is not None:
        notes.append(f"corrected BER below raw BER on {frac:.4f} of {extra['images_with_raw_errors']} images with raw errors")
    return BenchResult("zbir", config, columns, rows, notes, extra, digits=6)


def simulate_zbir(config: ExperimentConfig, threads: int = 1, decoder: LinearDecoderModel | None = None) -> BenchResult:
    """Z.B.I.R with and without error painting over a sweep of distortion strengths."""
    decoder = decoder or _decoder_for(config, config.decoder_p)
    key = _bench_key(config)
    rows = []
    for s in config.strengths:
        outcomes = run_pipeline(config, decoder, strength=s, threads=threads, key=key)
        _, r, _ = _zbir_rows(outcomes)
        off, on = r[0][1], r[1][1]
        rows.append((f"strength={s:g}", [off[0], on[0], off[1], on[1]]))
    columns = ["Z.B.I.R off", "Z.B.I.R on", "BER off", "BER on"]
    notes = [f"{config.images} images per strength; intrinsic rate {config.channel.get('intrinsic_error_rate')}"]
    return BenchResult("simulate-zbir", config, columns, rows, notes, digits=6)


def _oracle_sampler(model: ChannelModel, scheme: PaintingScheme):
    """Training pairs drawn from the channel itself.

    The target is a clean-decode error word of an A patch; the input is its
    painting as read back from a B patch, which picks up that patch's own
    intrinsic errors and the distortion flips.
    """

    def sample(rng: np.random.Generator, count: int):
        e = model.sample_error_masks(rng, count, distortion=0.0)
        x = paint_batch(e, scheme) ^ model.sample_error_masks(rng, count)
        return x.astype(np.float64), e.astype(np.float64)

    return sample


def traindist_variants(config: ExperimentConfig) -> dict[str, LinearDecoderModel]:
    model = ChannelModel.from_dict(config.channel)
    scheme = _scheme(config)
    seed = task_seed(config.seed, _TRAIN, 2000)
    steps = config.traindist_steps

    def cfg(p):
        return TrainConfig(p=p, learning_rate=config.learning_rate, batch_size=config.batch_size, steps=steps, seed=seed, scheme=scheme)

    out = {f"Bernoulli(p={p:g})": _train_cached(cfg(p), config.model_dir) for p in config.train_ps}
    # the density of the channel's combined error process, positions uniform
    known_p = model.intrinsic_error_rate + model.distortion_rate
    out["Known Error Probability"] = _train_cached(cfg(known_p), config.model_dir)
    tag = "oracle:" + json.dumps(model.to_dict(), sort_keys=True)
    out["Known Exact Error"] = _train_cached(cfg(known_p), config.model_dir, sampler=_oracle_sampler(model, scheme), tag=tag)
    return out


def bench_train_distribution(config: ExperimentConfig, threads: int = 1) -> BenchResult:
    """Z.B.I.R and BER of decoders trained on different error distributions.

    All variants read the same embedded and distorted corpus.
    """
    variants = traindist_variants(config)
    channel = ChannelModel.from_dict(config.channel)
    grid = PatchGrid.square(config.grid)
    assignment = PatchAssignment.named(config.assignment, grid)
    scheme = _scheme(config)
    paths = _corpus_paths(config)
    key = _bench_key(config)
    names = list(variants)

    def one(i: int):
        img = _corpus_image(config, i, paths)
        session = channel.open(task_seed(config.seed, _CHANNEL, i))
        info = embed_signature(img, key.secret, session, scheme, grid, assignment, check_phash=False)
        received = recompose(session.distort(crop(info.image, grid)), grid)
        truth = info.payload
        res = []
        raw = None
        for name in names:
            ro = extract_payload(received, session, variants[name], grid, assignment)
            raw = ro.raw
            res.append((truth ^ ro.corrected).popcount())
        return (truth ^ raw).popcount(), res

    outcomes = _map(one, list(range(config.images)), threads)
    n = len(outcomes)
    bits = n * 2048
    rows = []
    raw_errs = [r for r, _ in outcomes]
    rows.append(("No ERPA", [Cell(sum(e == 0 for e in raw_errs) / n, sum(e == 0 for e in raw_errs), n), Cell(sum(raw_errs) / bits, sum(raw_errs), bits)]))
    for j, name in enumerate(names):
        errs = [o[1][j] for o in outcomes]
        ok = sum(e == 0 for e in errs)
        rows.append((name, [Cell(ok / n, ok, n), Cell(sum(errs) / bits, sum(errs), bits)]))
    notes = [f"{n} images; decoders trained for {config.traindist_steps} steps; channel {json.dumps(config.channel, sort_keys=True)}"]
    return BenchResult("traindist", config, ["Z.B.I.R", "BER"], rows, notes, digits=6)


RUNNERS = {
    "painting": bench_painting_density,
    "permutation": bench_permutation,
    "traindist": bench_train_distribution,
    "zbir": bench_zbir,
    "simulate-zbir": simulate_zbir,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> BenchResult:
    result = RUNNERS[config.experiment](config, threads=threads)
    if config.output:
        result.write(config.output)
    return result
