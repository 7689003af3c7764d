import json

import pytest

from erpamark.bench import (
    ExperimentConfig,
    bench_painting_density,
    bench_permutation,
    bench_train_distribution,
    bench_zbir,
    clear_model_cache,
    run_experiment,
    simulate_zbir,
    task_seed,
    wilson_interval,
)

# reference intervals from statsmodels' proportion_confint(method="wilson")
WILSON = [
    (0, 10, 0.0, 0.27753279986288926),
    (5, 10, 0.23659309051256394, 0.7634069094874361),
    (99, 100, 0.9455138038212946, 0.9982325679358593),
    (86, 100, 0.7786281178903616, 0.9147365634006086),
]

TINY = dict(lengths=(2, 7), p_grid=(0.02, 0.1), trials=3000, steps=300)


@pytest.mark.parametrize("k,n,lo,hi", WILSON)
def test_wilson(k, n, lo, hi):
    got = wilson_interval(k, n)
    assert got[0] == pytest.approx(lo, abs=1e-12)
    assert got[1] == pytest.approx(hi, abs=1e-12)


def test_task_seed_stable():
    assert task_seed(0, 1, 2) == task_seed(0, 1, 2)
    assert task_seed(0, 1, 2) != task_seed(0, 2, 1)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(trials=0)
        with pytest.raises(ValueError):
            ExperimentConfig(p_grid=(0.0,))
        with pytest.raises(ValueError):
            ExperimentConfig(lengths=(1, 2))
        with pytest.raises(ValueError):
            ExperimentConfig(experiment="nope")
        with pytest.raises(ValueError):
            ExperimentConfig(channel={"kind": "lsb", "intrinsic_error_rate": 0.1})

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict({"trails": 5})

    def test_file_and_overrides(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"trials": 7, "channel": {"distortion_rate": 0.001}}))
        cfg = ExperimentConfig.from_file(tmp_path / "c.json", seed=3, images=None)
        assert cfg.trials == 7 and cfg.seed == 3 and cfg.images == 500
        assert cfg.channel["distortion_rate"] == 0.001 and cfg.channel["kind"] == "simulated"

    def test_hash(self):
        a = ExperimentConfig(trials=10)
        assert a.config_hash() == ExperimentConfig(trials=10, output="x.json").config_hash()
        assert a.config_hash() != ExperimentConfig(trials=11).config_hash()
        assert a.config_hash() != ExperimentConfig(trials=10, seed=1).config_hash()


class TestTables:
    def test_painting_shape(self):
        res = bench_painting_density(ExperimentConfig(**TINY))
        assert [r for r, _ in res.rows] == ["L=2", "L=7"]
        assert res.columns == ["p=0.02", "p=0.1"]
        cell = res.cell("L=7", "p=0.02")
        lo, hi = cell.interval
        assert lo <= cell.value <= hi and cell.total == 3000 * 64
        text = res.to_text()
        assert res.config.config_hash() in text

    def test_threads_byte_identical(self):
        cfg = ExperimentConfig(**TINY)
        clear_model_cache()
        one = bench_painting_density(cfg, threads=1)
        clear_model_cache()
        three = bench_painting_density(cfg, threads=3)
        assert one.to_text() == three.to_text()
        assert one.to_json() == three.to_json()

    def test_permutation_rows(self):
        res = bench_permutation(ExperimentConfig(experiment="permutation", **TINY))
        assert [r for r, _ in res.rows] == ["DCSS", "NearBy"]

    def test_model_dir_cache(self, tmp_path):
        cfg = ExperimentConfig(model_dir=str(tmp_path), **TINY)
        clear_model_cache()
        first = bench_painting_density(cfg).to_json()
        assert len(list(tmp_path.glob("decoder-*.json"))) == 4
        clear_model_cache()
        assert bench_painting_density(cfg).to_json() == first

    def test_divergent_cell_is_reported(self):
        cfg = ExperimentConfig(lengths=(7,), p_grid=(0.3,), trials=10, steps=2000, learning_rate=1e306)
        res = bench_painting_density(cfg)
        assert res.cell("L=7", "p=0.3").error
        assert "failed" in res.to_text()


class TestEndToEnd:
    def test_zbir_lsb_exact(self):
        cfg = ExperimentConfig(experiment="zbir", images=4, image_size=64, steps=500, channel={"kind": "lsb"})
        res = bench_zbir(cfg)
        assert res.value("ERPA on", "Z.B.I.R") == 1.0
        assert res.value("ERPA on", "BER") == 0.0

    def test_zbir_threads_identical(self):
        cfg = ExperimentConfig(experiment="zbir", images=6, image_size=64, steps=500)
        assert bench_zbir(cfg, threads=1).to_json() == bench_zbir(cfg, threads=2).to_json()

    def test_simulate_zbir_rows(self):
        cfg = ExperimentConfig(experiment="simulate-zbir", images=3, image_size=64, steps=300, strengths=(0.0, 0.01))
        res = simulate_zbir(cfg)
        assert [r for r, _ in res.rows] == ["strength=0", "strength=0.01"]
        assert res.value("strength=0.01", "BER off") > res.value("strength=0", "BER off")

    def test_traindist_rows(self):
        cfg = ExperimentConfig(experiment="traindist", images=3, image_size=64, traindist_steps=300)
        res = bench_train_distribution(cfg)
        labels = [r for r, _ in res.rows]
        assert labels[0] == "No ERPA"
        assert "Known Exact Error" in labels and "Known Error Probability" in labels
        assert "Bernoulli(p=0.07)" in labels

    def test_run_experiment_writes_output(self, tmp_path):
        cfg = ExperimentConfig(output=str(tmp_path / "out.json"), **TINY)
        res = run_experiment(cfg)
        assert json.loads((tmp_path / "out.json").read_text()) == json.loads(res.to_json())
