"""Single-layer linear + sigmoid decoder that inverts error painting.

The model maps a (possibly corrupted) painted 64-bit vector to per-bit error
probabilities. Training draws error vectors from Bernoulli(p), paints them,
flips each painted bit with probability p, and fits the ground-truth error
vector with binary cross-entropy under plain minibatch SGD.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from erpamark.bits import BitVector
from erpamark.codec import PaintingScheme, paint_batch

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
# randomness for this many SGD steps is drawn in one call
_RNG_BLOCK = 250
EVAL_BLOCK = 4096

Sampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class LinearDecoderModel:
    weights: np.ndarray
    bias: np.ndarray
    scheme: PaintingScheme
    threshold: float = 0.5
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        n = self.scheme.n
        if self.weights.shape != (n, n) or self.bias.shape != (n,):
            raise ValueError(f"expected weights ({n}, {n}) and bias ({n},), got {self.weights.shape}, {self.bias.shape}")

    @classmethod
    def initial(cls, scheme: PaintingScheme, rng: np.random.Generator) -> "LinearDecoderModel":
        n = scheme.n
        return cls(rng.uniform(-0.1, 0.1, size=(n, n)), np.zeros(n), scheme)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.weights).all() and np.isfinite(self.bias).all())

    def copy(self) -> "LinearDecoderModel":
        return LinearDecoderModel(self.weights.copy(), self.bias.copy(), self.scheme, self.threshold, dict(self.meta))


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: no overflow for large |z|, and exactly 0.5 at z == 0
    return 0.5 + 0.5 * np.tanh(0.5 * z)


def decode_batch(model: LinearDecoderModel, observed: np.ndarray) -> np.ndarray:
    """Decode each row of an (N, 64) 0/1 array."""
    if not model.is_finite():
        raise ValueError("model has non-finite parameters")
    x = np.asarray(observed, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.scheme.n:
        raise ValueError(f"expected shape (N, {model.scheme.n}), got {x.shape}")
    probs = sigmoid(x @ model.weights.T + model.bias)
    return (probs > model.threshold).astype(np.uint8)


def decode(model: LinearDecoderModel, observed: BitVector) -> BitVector:
    if observed.length != model.scheme.n:
        raise ValueError(f"observation has {observed.length} bits, model expects {model.scheme.n}")
    return BitVector.from_bits(decode_batch(model, observed.to_array()[None, :])[0])


def bce_loss_and_grad(weights, bias, x, y):
    """Per-sample cross-entropy (summed over output bits), averaged over the batch.

    Returns ``(loss, dL/dweights, dL/dbias)``.
    """
    z = x @ weights.T + bias
    loss = float(np.mean(np.sum(np.logaddexp(0.0, z) - y * z, axis=1)))
    g = (sigmoid(z) - y) / x.shape[0]
    return loss, g.T @ x, g.sum(axis=0)


@dataclass(frozen=True)
class TrainConfig:
    p: float
    learning_rate: float = 1e-2
    batch_size: int = 64
    steps: int = 50_000
    seed: int = 0
    scheme: PaintingScheme = field(default_factory=PaintingScheme.dcss)
    # corruption rate of the painted vector; None means "same as p"
    noise_p: float | None = None
    log_every: int = 1000

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if self.noise_p is not None and not 0 <= self.noise_p < 1:
            raise ValueError(f"noise_p must be in [0, 1), got {self.noise_p}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")

    @property
    def corruption(self) -> float:
        return self.p if self.noise_p is None else self.noise_p

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "steps": self.steps,
            "seed": self.seed,
            "scheme": self.scheme.to_dict(),
            "noise_p": self.noise_p,
        }


def bernoulli_sampler(scheme: PaintingScheme, p: float, noise_p: float) -> Sampler:
    """Training pairs (corrupted painting, error vector) under independent flips."""
    mat = scheme.matrix.astype(np.float64)
    n = scheme.n

    def sample(rng: np.random.Generator, count: int):
        u = rng.random((count, 2 * n))
        e = (u[:, :n] < p).astype(np.float64)
        painted = (e @ mat) > 0
        x = (painted ^ (u[:, n:] < noise_p)).astype(np.float64)
        return x, e

    return sample


def _sgd(config: TrainConfig, sampler: Sampler, rng: np.random.Generator, model: LinearDecoderModel) -> float:
    w, b = model.weights, model.bias
    lr, bs = config.learning_rate, config.batch_size
    step = 0
    running = 0.0
    while step < config.steps:
        block = min(_RNG_BLOCK, config.steps - step)
        xs, ys = sampler(rng, block * bs)
        for j in range(block):
            x = xs[j * bs:(j + 1) * bs]
            y = ys[j * bs:(j + 1) * bs]
            z = x @ w.T + b
            g = (sigmoid(z) - y) / bs
            w -= lr * (g.T @ x)
            b -= lr * g.sum(axis=0)
            step += 1
            if config.log_every and step % config.log_every == 0:
                running = float(np.mean(np.sum(np.logaddexp(0.0, z) - y * z, axis=1)))
                if not math.isfinite(running) or not model.is_finite():
                    raise TrainingDiverged(f"non-finite loss at step {step} (lr={lr}, p={config.p})")
                log.debug("step %d loss %.5f", step, running)
    if not model.is_finite():
        raise TrainingDiverged(f"non-finite parameters after {step} steps")
    return running


def train(
    config: TrainConfig,
    sampler: Sampler | None = None,
    init: LinearDecoderModel | None = None,
) -> LinearDecoderModel:
    """Fit a decoder by minibatch SGD; deterministic given ``config.seed``."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7A1E]))
    model = init.copy() if init is not None else LinearDecoderModel.initial(config.scheme, rng)
    if sampler is None:
        sampler = bernoulli_sampler(config.scheme, config.p, config.corruption)
    with np.errstate(over="ignore", invalid="ignore"):
        running = _sgd(config, sampler, rng, model)
    model.meta = {"train": config.to_dict(), "final_loss": running}
    return model


@dataclass
class EvalResult:
    bit_accuracy: float
    exact_recovery_rate: float
    trials: int
    bits: int
    correct_bits: int
    exact_trials: int

    def as_dict(self) -> dict:
        return {
            "bit_accuracy": self.bit_accuracy,
            "exact_recovery_rate": self.exact_recovery_rate,
            "trials": self.trials,
        }


def _eval_block(model, p, noise_p, seed, index, count):
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    n = model.scheme.n
    u = rng.random((count, 2 * n))
    e = (u[:, :n] < p).astype(np.uint8)
    x = paint_batch(e, model.scheme) ^ (u[:, n:] < noise_p).astype(np.uint8)
    ok = decode_batch(model, x) == e
    return int(ok.sum()), int(ok.all(axis=1).sum())


def evaluate(
    model: LinearDecoderModel,
    p: float,
    trials: int,
    seed: int = 0,
    noise_p: float | None = None,
    threads: int = 1,
) -> EvalResult:
    """Bit accuracy and exact-recovery rate under Bernoulli(p) errors and corruption.

    Trials are split into fixed blocks whose seeds derive from (seed, block
    index), so the numbers do not depend on ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= p < 1:
        raise ValueError(f"p must be in [0, 1), got {p}")
    noise = p if noise_p is None else noise_p
    blocks = [(i, min(EVAL_BLOCK, trials - i * EVAL_BLOCK)) for i in range(-(-trials // EVAL_BLOCK))]
    run = lambda blk: _eval_block(model, p, noise, seed, *blk)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(blk) for blk in blocks]
    correct = sum(c for c, _ in parts)
    exact = sum(x for _, x in parts)
    bits = trials * model.scheme.n
    return EvalResult(correct / bits, exact / trials, trials, bits, correct, exact)


def model_to_dict(model: LinearDecoderModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "erpa-linear-decoder",
        "n": model.scheme.n,
        "scheme": model.scheme.to_dict(),
        "threshold": model.threshold,
        "weights": [float(v) for v in model.weights.ravel()],
        "bias": [float(v) for v in model.bias],
        "meta": model.meta,
    }


def model_from_dict(d: dict) -> LinearDecoderModel:
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
    n = int(d["n"])
    scheme = PaintingScheme.from_dict(d["scheme"])
    if scheme.n != n:
        raise ValueError("scheme modulus disagrees with model size")
    weights = np.array(d["weights"], dtype=np.float64).reshape(n, n)
    return LinearDecoderModel(weights, np.array(d["bias"], dtype=np.float64), scheme, float(d["threshold"]), d.get("meta", {}))


def save_model(model: LinearDecoderModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str | Path) -> LinearDecoderModel:
    return model_from_dict(json.loads(Path(path).read_text()))
