import numpy as np
import pytest

import csiloc

TINY = {
    "grid": "2.0",
    "w1": "9",
    "train_per_day": "1",
    "val_per_day": "1",
    "test_points": "12",
    "fc1": "16",
    "fc2": "8",
    "filters": "2",
    "epochs": "2",
    "lstm_epochs": "2",
    "train_count": "64",
    "val_count": "16",
    "amb_rps": "20",
    "amb_day": "-1",
    "seed": "3",
}


def test_pearson_matches_numpy():
    rng = np.random.default_rng(1)
    u, v = rng.normal(size=50), rng.normal(size=50)
    assert csiloc.pearson(u, v) == pytest.approx(np.corrcoef(u, v)[0, 1], abs=1e-12)
    assert csiloc.pearson(np.ones(5), v[:5]) == 0.0


def test_pearson_length_mismatch_raises():
    with pytest.raises(csiloc.InputError):
        csiloc.pearson(np.ones(3), np.ones(4))


def test_self_correlation_of_identical_samples_is_one():
    x = np.arange(10.0)
    assert csiloc.average_self_correlation([x, 2 * x + 1, x]) == pytest.approx(1.0)


def test_error_report():
    pred = np.array([[0.0, 0.0], [3.0, 4.0]])
    truth = np.zeros((2, 2))
    r = csiloc.error_report(pred, truth)
    assert r["errors"] == [0.0, 5.0]
    assert r["mean"] == pytest.approx(2.5)
    assert r["p80"] == pytest.approx(5.0)


def test_count_ambiguous_ignores_near_neighbours():
    a = [np.array([1.0, 2.0, 3.0])]
    locs = np.array([[0.0, 0.0], [0.2, 0.0], [5.0, 0.0]])
    res = csiloc.count_ambiguous([a, a, a], locs, grid_size=0.5, threshold=0.8)
    assert res["counts"] == [1, 1, 2]
    assert res["max_count"] == 2


def test_preprocessing_range_and_shape():
    rng = np.random.default_rng(2)
    img = rng.uniform(0.0, 50.0, size=(30, 30, 3))
    out = csiloc.preprocess(img, a_max=40.0)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    norm = csiloc.minmax_normalize_rows(img)
    assert norm.min() == pytest.approx(0.0) and norm.max() == pytest.approx(1.0)
    filtered = csiloc.median_filter(img, 3)
    assert filtered.shape == img.shape


def test_bad_image_shape_raises():
    with pytest.raises(csiloc.InputError):
        csiloc.preprocess(np.ones((4, 4)), a_max=1.0)


def test_synthesize_is_deterministic():
    cfg = {"grid": "3.0", "w1": "9", "train_per_day": "1", "val_per_day": "1", "test_points": "5", "seed": "11"}
    a = csiloc.synthesize(cfg)
    b = csiloc.synthesize(cfg)
    assert a["rps"].shape[1] == 2
    train = a["train"]
    assert train["images"].shape[1:] == (30, 30, 3)
    assert np.array_equal(train["images"], b["train"]["images"])
    assert set(np.unique(train["rp_index"])) == set(range(len(a["rps"])))
    assert len(a["tests"]) == 3


def test_unknown_config_key_raises():
    with pytest.raises(csiloc.ConfigError):
        csiloc.synthesize({"no_such_key": "1"})


def test_run_experiment_tiny():
    lines = []
    res = csiloc.run_experiment(TINY, lines.append)
    assert lines
    assert len(res["days"]) == 3
    assert np.isfinite(res["cnn_only"]["mean"]) and np.isfinite(res["cnn_lstm"]["mean"])
    assert len(res["cnn_curve"]) == 2 and len(res["lstm_curve"]) == 2
    assert -1.0 <= res["raw_correlation"] <= 1.0
