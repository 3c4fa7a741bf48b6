"""Training loop and evaluation report tests on a small benchmark dataset."""

import numpy as np
import pytest

from fracsde import (
    TrainConfig,
    benchmark_1d,
    default_alpha,
    evaluate,
    generate_dataset,
    train,
)


def _params_equal(a, b):
    return (
        np.array_equal(a.w1, b.w1)
        and np.array_equal(a.b1, b.b1)
        and np.array_equal(a.w2, b.w2)
        and np.array_equal(a.b2, b.b2)
    )


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(width=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(patience=0)
    with pytest.raises(ValueError):
        TrainConfig(group_size=0)
    with pytest.raises(ValueError):
        TrainConfig(alpha=0.6)
    with pytest.raises(ValueError):
        TrainConfig(noise_mode="brownian")


def test_train_config_to_dict_roundtrip():
    cfg = TrainConfig(width=16, alpha=0.35, seed=9)
    out = cfg.to_dict()
    assert out["width"] == 16
    assert out["alpha"] == 0.35
    assert out["seed"] == 9
    assert out["noise_mode"] == "oracle"
    assert len(out) == 13


def test_training_reduces_loss(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=40, patience=40, seed=3)
    result = train(small_dataset, cfg)
    hist = result.history
    assert hist.train_loss[-1] < hist.train_loss[0]
    assert min(hist.val_loss) < hist.val_loss[0]
    assert hist.n_epochs == len(hist.train_loss) == len(hist.val_loss)
    assert hist.wall_seconds > 0.0


def test_best_epoch_snapshot_matches_val_minimum(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=40, patience=40, seed=3)
    result = train(small_dataset, cfg)
    hist = result.history
    assert hist.val_loss[hist.best_epoch] == min(hist.val_loss)
    report = evaluate(
        result.field(), small_dataset, split="val", alpha=hist.alpha
    )
    assert report.loss_mean == pytest.approx(min(hist.val_loss), rel=1e-10)


def test_early_stopping_respects_patience(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=200, patience=1, seed=3)
    result = train(small_dataset, cfg)
    val = result.history.val_loss
    improved_every_epoch = all(b < a for a, b in zip(val, val[1:]))
    assert result.history.n_epochs < 200 or improved_every_epoch


def test_training_is_deterministic(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=10, patience=10, seed=5)
    first = train(small_dataset, cfg)
    second = train(small_dataset, cfg)
    assert first.history.train_loss == second.history.train_loss
    assert first.history.val_loss == second.history.val_loss
    assert _params_equal(first.drift, second.drift)
    assert _params_equal(first.diffusion, second.diffusion)


def test_hurst_estimate_feeds_default_alpha(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=2, patience=2, seed=0)
    hist = train(small_dataset, cfg).history
    assert 0.5 < hist.hurst_estimate < 0.99
    assert hist.alpha == default_alpha(hist.hurst_estimate)


def test_explicit_alpha_is_used(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=2, patience=2, alpha=0.3, seed=0)
    hist = train(small_dataset, cfg).history
    assert hist.alpha == 0.3


def test_coupled_mode_requires_mvn_dataset(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=2, patience=2, noise_mode="coupled")
    with pytest.raises(ValueError):
        train(small_dataset, cfg)


def test_coupled_mode_trains_on_mvn_dataset():
    dataset = generate_dataset(
        benchmark_1d(),
        hurst=0.7,
        n_coarse=8,
        k=2,
        counts=(4, 2, 2),
        seed=21,
        noise="mvn",
    )
    cfg = TrainConfig(width=8, max_epochs=3, patience=3, noise_mode="coupled")
    result = train(dataset, cfg)
    assert np.all(np.isfinite(result.history.train_loss))
    report = evaluate(result.field(), dataset, noise_mode="coupled")
    assert np.isfinite(report.loss_mean)


def test_evaluate_true_field_recovers_data_exactly(small_dataset):
    field = benchmark_1d()
    report = evaluate(field, small_dataset, split="test", field_true=field)
    assert report.loss_mean == 0.0
    assert report.n_paths == 3
    assert report.recovery is not None
    assert report.recovery.l2_drift == 0.0
    assert report.recovery.l2_diffusion == 0.0
    out = report.to_dict()
    assert out["recovery"]["n_points"] == report.recovery.n_points


def test_evaluate_trained_model_report(small_dataset):
    cfg = TrainConfig(width=8, max_epochs=5, patience=5, seed=1)
    result = train(small_dataset, cfg)
    report = evaluate(result.field(), small_dataset, field_true=benchmark_1d())
    assert report.loss_mean > 0.0
    assert report.loss_std >= 0.0
    assert report.alpha == result.history.alpha
    assert report.recovery.l2_drift > 0.0
    assert report.recovery.n_points == 4096


def test_evaluate_rejects_unknown_split(small_dataset):
    with pytest.raises(ValueError):
        evaluate(benchmark_1d(), small_dataset, split="bogus")


def test_evaluate_explicit_alpha(small_dataset):
    report = evaluate(benchmark_1d(), small_dataset, alpha=0.35)
    assert report.alpha == 0.35
