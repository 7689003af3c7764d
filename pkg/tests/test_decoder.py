import itertools
import json

import numpy as np
import pytest

from erpamark.bits import BitVector
from erpamark.codec import PaintingScheme, oracle_decode, paint, paint_batch
from erpamark.decoder import (
    LinearDecoderModel,
    TrainConfig,
    TrainingDiverged,
    bce_loss_and_grad,
    decode,
    decode_batch,
    evaluate,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    sigmoid,
    train,
)

CANON = PaintingScheme.dcss(7)


def numeric_grad(weights, bias, x, y, h=1e-6):
    gw = np.zeros_like(weights)
    gb = np.zeros_like(bias)
    for idx in np.ndindex(*weights.shape):
        wp, wm = weights.copy(), weights.copy()
        wp[idx] += h
        wm[idx] -= h
        gw[idx] = (bce_loss_and_grad(wp, bias, x, y)[0] - bce_loss_and_grad(wm, bias, x, y)[0]) / (2 * h)
    for i in range(bias.size):
        bp, bm = bias.copy(), bias.copy()
        bp[i] += h
        bm[i] -= h
        gb[i] = (bce_loss_and_grad(weights, bp, x, y)[0] - bce_loss_and_grad(weights, bm, x, y)[0]) / (2 * h)
    return gw, gb


def all_low_weight_errors():
    yield BitVector.zeros(64)
    for k in (1, 2):
        for combo in itertools.combinations(range(64), k):
            yield BitVector.from_positions(combo, 64)


class TestDecode:
    def test_zero_model_predicts_zero(self):
        model = LinearDecoderModel(np.zeros((64, 64)), np.zeros(64), CANON)
        obs = BitVector.ones(64)
        assert decode(model, obs) == BitVector.zeros(64)

    def test_identity_model(self):
        big = 50.0
        model = LinearDecoderModel(big * np.eye(64), np.full(64, -big / 2), CANON)
        for v in (0, 1, 0xF0F0F0F0F0F0F0F0, 2**64 - 1):
            assert decode(model, BitVector(v, 64)) == BitVector(v, 64)

    def test_length_mismatch(self):
        model = LinearDecoderModel(np.zeros((64, 64)), np.zeros(64), CANON)
        with pytest.raises(ValueError):
            decode(model, BitVector.zeros(32))

    def test_non_finite_model(self):
        w = np.zeros((64, 64))
        w[3, 4] = np.nan
        with pytest.raises(ValueError):
            decode(LinearDecoderModel(w, np.zeros(64), CANON), BitVector.zeros(64))

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            LinearDecoderModel(np.zeros((64, 63)), np.zeros(64), CANON)

    def test_sigmoid_values(self):
        assert sigmoid(np.array(0.0)) == 0.5
        assert np.allclose(sigmoid(np.array([-2.0, 3.0])), 1 / (1 + np.exp(-np.array([-2.0, 3.0]))))
        assert np.isfinite(sigmoid(np.array([-1e6, 1e6]))).all()


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        n = 8
        for _ in range(5):
            w = rng.uniform(-1, 1, (n, n))
            b = rng.uniform(-1, 1, n)
            x = rng.integers(0, 2, (6, n)).astype(float)
            y = rng.integers(0, 2, (6, n)).astype(float)
            _, gw, gb = bce_loss_and_grad(w, b, x, y)
            nw, nb = numeric_grad(w, b, x, y)
            assert np.max(np.abs(gw - nw)) / max(np.max(np.abs(nw)), 1e-12) < 1e-4
            assert np.max(np.abs(gb - nb)) / max(np.max(np.abs(nb)), 1e-12) < 1e-4

    def test_loss_is_per_sample_sum(self):
        x = np.zeros((2, 4))
        y = np.zeros((2, 4))
        loss, _, _ = bce_loss_and_grad(np.zeros((4, 4)), np.zeros(4), x, y)
        assert loss == pytest.approx(4 * np.log(2))


class TestTrain:
    def test_zero_steps_is_initialization(self):
        cfg = TrainConfig(p=0.05, steps=0, seed=9)
        a, b = train(cfg), train(cfg)
        assert np.array_equal(a.weights, b.weights)
        assert np.all(np.abs(a.weights) <= 0.1)
        assert np.array_equal(a.bias, np.zeros(64))

    def test_deterministic(self, tmp_path):
        cfg = TrainConfig(p=0.05, steps=300, seed=4)
        save_model(train(cfg), tmp_path / "a.json")
        save_model(train(cfg), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_seed_matters(self):
        a = train(TrainConfig(p=0.05, steps=10, seed=1))
        b = train(TrainConfig(p=0.05, steps=10, seed=2))
        assert not np.array_equal(a.weights, b.weights)

    def test_divergence_is_reported(self):
        with pytest.raises(TrainingDiverged):
            train(TrainConfig(p=0.3, steps=2000, learning_rate=1e306, log_every=100))

    @pytest.mark.parametrize("kw", [{"p": 0.0}, {"p": 1.0}, {"p": 0.1, "learning_rate": 0}, {"p": 0.1, "batch_size": 0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_loss_decreases(self):
        m = train(TrainConfig(p=0.05, steps=2000, seed=0, log_every=2000))
        # the untrained model sits near 64 * log(2)
        assert m.meta["final_loss"] < 10.0


class TestTrainedModel:
    @pytest.mark.parametrize("i", range(64))
    def test_recovers_single_errors(self, decoder_p01, i):
        e = BitVector(1 << i, 64)
        assert decode(decoder_p01, paint(e, CANON)) == e

    def test_noiseless_two_error_set(self, decoder_p01):
        errs = list(all_low_weight_errors())
        assert len(errs) == 2081
        arr = np.stack([e.to_array() for e in errs])
        out = decode_batch(decoder_p01, paint_batch(arr, CANON))
        rate = np.mean(np.all(out == arr, axis=1))
        assert rate >= 0.99

    def test_noiseless_agrees_with_oracle(self, decoder_p01):
        # with p=0 there is no corruption, so decoded vectors can be checked against the oracle
        rng = np.random.default_rng(5)
        e = (rng.random((300, 64)) < 0.01).astype(np.uint8)
        e = e[e.sum(axis=1) <= 2]
        x = paint_batch(e, CANON)
        learned = decode_batch(decoder_p01, x)
        oracle = np.stack([oracle_decode(BitVector.from_bits(r), CANON, 2).to_array() for r in x])
        assert np.mean(np.all(learned == oracle, axis=1)) >= 0.99
        res = evaluate(decoder_p01, 0.0, 2000, seed=1)
        assert res.bit_accuracy == 1.0 and res.exact_recovery_rate == 1.0


class TestEvaluate:
    def test_thread_invariant(self, decoder_p01):
        a = evaluate(decoder_p01, 0.05, 10_000, seed=3, threads=1)
        b = evaluate(decoder_p01, 0.05, 10_000, seed=3, threads=3)
        assert a == b

    def test_counts(self, decoder_p01):
        r = evaluate(decoder_p01, 0.02, 5000, seed=0)
        assert r.bits == 5000 * 64
        assert r.bit_accuracy == r.correct_bits / r.bits
        assert 0 <= r.exact_recovery_rate <= r.bit_accuracy <= 1

    def test_validation(self, decoder_p01):
        with pytest.raises(ValueError):
            evaluate(decoder_p01, 0.1, 0)
        with pytest.raises(ValueError):
            evaluate(decoder_p01, 1.0, 10)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path, decoder_p01):
        path = tmp_path / "m.json"
        save_model(decoder_p01, path)
        back = load_model(path)
        assert np.array_equal(back.weights, decoder_p01.weights)
        assert np.array_equal(back.bias, decoder_p01.bias)
        assert back.scheme == decoder_p01.scheme
        save_model(back, tmp_path / "again.json")
        assert path.read_bytes() == (tmp_path / "again.json").read_bytes()

    def test_document_fields(self, decoder_p01):
        d = model_to_dict(decoder_p01)
        assert d["n"] == 64 and d["format_version"] == 1
        assert len(d["weights"]) == 64 * 64 and len(d["bias"]) == 64
        json.dumps(d)

    def test_rejects_unknown_version(self, decoder_p01):
        d = model_to_dict(decoder_p01)
        d["format_version"] = 99
        with pytest.raises(ValueError):
            model_from_dict(d)
