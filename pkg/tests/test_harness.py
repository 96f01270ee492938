import json
from dataclasses import replace

import numpy as np
import pytest

from dualqgan import harness
from dualqgan.adversary import Gradients
from dualqgan.circuit import AnsatzSpec
from dualqgan.data import synth_calorimeter
from dualqgan.errors import ArgumentError, ConfigError, LoadError, NumericError
from dualqgan.generator import DualGenerator, Mode
from dualqgan.harness import (
    SCAN_HEADER,
    Seeds,
    TrainingConfig,
    evaluate_generator,
    inference_test,
    noise_scan,
    read_scan_csv,
    train,
    write_scan_csv,
)
from dualqgan.noise import NoiseModel

SHORT = TrainingConfig(epochs=4, eval_every=2)


@pytest.fixture(scope="module")
def dataset():
    return SHORT.make_dataset()


@pytest.fixture(scope="module")
def short_run(dataset):
    return train(SHORT, dataset)


@pytest.mark.parametrize("kw", [dict(epochs=0), dict(batch=0), dict(eval_every=0), dict(image_weighting="x")])
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        TrainingConfig(**kw)


def test_config_dict_round_trip(tmp_path):
    cfg = TrainingConfig(
        epochs=7, shots=128, noise=NoiseModel.uniform(0.02, 0.01, 3), seeds=Seeds(1, 2, 3), lr_disc_final=1e-4
    )
    assert TrainingConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"epochs": 3, "n2": 3}))
    assert TrainingConfig.load(path).epochs == 3


def test_config_rejects_unknown_and_inconsistent():
    with pytest.raises(ConfigError):
        TrainingConfig.from_dict({"epoch": 3})
    with pytest.raises(ConfigError):
        TrainingConfig.from_dict({"n2": 4, "ansatz2": AnsatzSpec(3, 5, "linear").to_dict()})
    with pytest.raises(ConfigError):
        TrainingConfig.from_dict({"noise": {"two_qubit_depol": 3}})


def test_config_resizes_discriminator_with_n2():
    cfg = TrainingConfig.from_dict({"n2": 4})
    assert cfg.disc_layers[0] == 16 and cfg.make_dataset().pixels == 16


def test_single_epoch_run():
    cfg = TrainingConfig(epochs=1)
    run = train(cfg, cfg.make_dataset())
    assert len(run.history) == 1 and run.final.epoch == 1
    assert run.generator.theta2.size == cfg.ansatz2.n_params
    assert run.discriminator.layer_sizes == cfg.disc_layers
    assert run.wall_time > 0


def test_history_schedule(short_run):
    assert [r.epoch for r in short_run.history] == [2, 4]


def test_exact_training_is_deterministic(dataset, short_run):
    again = train(SHORT, dataset)
    assert again.history == short_run.history
    assert np.array_equal(again.generator.theta2, short_run.generator.theta2)


def test_shot_mode_training_runs(dataset):
    run = train(replace(SHORT, epochs=1, shots=64, noise=NoiseModel(0.02)), dataset)
    assert len(run.history) == 1


def test_pixel_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        train(SHORT, synth_calorimeter(4, 16, 0.1, 2, 0))


def test_non_finite_loss_reports_epoch(dataset, monkeypatch):
    monkeypatch.setattr(harness, "disc_backprop", lambda *a, **k: Gradients([], float("nan")))
    with pytest.raises(NumericError, match="epoch 1"):
        train(SHORT, dataset)


def test_inference_exact_has_zero_std(short_run, dataset):
    rep = inference_test(short_run.generator, NoiseModel(), 5, Mode(), dataset)
    assert rep.d_kl_stats[1] == 0 and rep.d_kl_ind_stats[1] == 0
    # same code path as the training evaluation
    assert abs(rep.d_kl_stats[0] - short_run.final.d_kl) < 1e-12


def test_inference_shots_vary(short_run, dataset):
    rep = inference_test(short_run.generator, NoiseModel(0.02), 6, Mode(4096, 3), dataset)
    assert rep.d_kl_stats[1] > 0 and rep.d_kl_ind_stats[1] > 0
    again = inference_test(short_run.generator, NoiseModel(0.02), 6, Mode(4096, 3), dataset)
    assert again.d_kl == rep.d_kl
    d = rep.to_dict()
    assert d["repetitions"] == 6 and set(d["d_kl"]) == {"mean", "std", "values"}
    assert " ± " in d["table"]["d_kl"]


def test_inference_loads_checkpoints(short_run, dataset, tmp_path):
    path = tmp_path / "g.json"
    short_run.generator.save(path)
    rep = inference_test(path, NoiseModel(), 2, Mode(), dataset)
    assert rep.d_kl[0] == pytest.approx(short_run.final.d_kl, abs=1e-12)
    path.write_text("{not json")
    with pytest.raises(LoadError):
        inference_test(path, NoiseModel(), 2, Mode(), dataset)
    with pytest.raises(ArgumentError):
        inference_test(short_run.generator, NoiseModel(), 1)


def test_scan_rows_cartesian_and_sorted(short_run, dataset):
    rows = noise_scan(short_run.generator, [0.02, 0.0, 0.01], [0.01, 0.0], [3, 1], shots=256, dataset=dataset)
    assert len(rows) == 3 * 2 * 2
    keys = [(r.depol, r.readout, r.seed) for r in rows]
    assert keys == sorted(keys)
    assert read_scan_csv(write_scan_csv(rows)) == rows
    assert write_scan_csv(rows).splitlines()[0] == SCAN_HEADER


def test_scan_degenerate_grid_equals_inference(short_run, dataset):
    (row,) = noise_scan(short_run.generator, [0.0], [0.0], [0], dataset=dataset)
    assert row.record.d_kl == evaluate_generator(short_run.generator, dataset, NoiseModel()).d_kl
    assert row.record.d_kl == pytest.approx(short_run.final.d_kl, abs=1e-12)


def test_scan_training_under_noise(dataset):
    cfg = replace(SHORT, epochs=2, eval_every=1)
    rows = noise_scan(cfg, [0.0, 0.02], [0.0], [0], train_under_noise=True, dataset=dataset)
    assert len(rows) == 2
    plain = train(cfg, dataset).final
    assert rows[0].record.d_kl == plain.d_kl
    with pytest.raises(ArgumentError):
        noise_scan(DualGenerator.from_ansatz(cfg.ansatz1, cfg.ansatz2), [0.0], train_under_noise=True)
    with pytest.raises(ArgumentError):
        noise_scan(cfg, [], [0.0], [0])


def test_scan_from_config_trains_once_per_seed(dataset, monkeypatch):
    calls = []
    real_train = harness.train

    def counting(cfg, ds):
        calls.append(cfg.seeds.init)
        return real_train(cfg, ds)

    monkeypatch.setattr(harness, "train", counting)
    rows = noise_scan(replace(SHORT, epochs=1), [0.0, 0.05], [0.0], [0, 1], dataset=dataset)
    assert len(rows) == 4 and sorted(calls) == [0, 1]


def test_scan_median_ordering_over_device_cx_errors(trained_runs):
    # CX errors of the tabulated devices; inference of one trained checkpoint
    runs, dataset, _ = trained_runs
    grid = [0.0, 0.0046, 0.0137, 0.0168, 0.0458]
    rows = noise_scan(runs[0].generator, grid, [0.0], range(5), shots=20_000, dataset=dataset)
    medians = [float(np.median([r.record.d_kl for r in rows if r.depol == lam])) for lam in grid]
    assert all(a <= b for a, b in zip(medians, medians[1:])), medians
