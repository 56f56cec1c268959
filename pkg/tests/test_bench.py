import json

import numpy as np
import pytest

from plantstress.bench import bench_model, compare, prediction_hash


def predictor(X):
    return (np.asarray(X).sum(axis=(1, 2)) > 0).astype(np.int64)


def test_single_repeat_stats():
    X = np.random.default_rng(0).normal(size=(10, 48, 2))
    r = bench_model(predictor, X, repeats=1, name="p")
    assert r.wall_mean == r.wall_min == r.wall_max and r.wall_cv == 0.0
    assert r.hashes_identical and r.prediction_hash == prediction_hash(predictor(X))
    assert r.power == "not measured" and r.memory_source == "tracemalloc" and r.peak_memory > 0
    json.loads(r.to_json())


def test_nondeterministic_predictor_detected():
    rng = np.random.default_rng(1)
    r = bench_model(lambda X: rng.integers(0, 2, len(X)), np.zeros((50, 48, 2)), repeats=3)
    assert not r.hashes_identical


def test_errors_propagate():
    def boom(X):
        raise RuntimeError("no")
    with pytest.raises(RuntimeError):
        bench_model(boom, np.zeros((2, 48, 2)))
    with pytest.raises(ValueError):
        bench_model(predictor, np.zeros((2, 48, 2)), repeats=0)


def test_compare_table_and_unavailable_memory():
    X = np.zeros((20, 48, 2))
    a = bench_model(predictor, X, repeats=2, name="a")
    b = bench_model(predictor, X, repeats=2, name="b", measure_memory=False)
    rows, csv_text, json_text = compare([a, b])
    assert len(rows) == 2 and [r["rank"] for r in rows] == [1, 2]
    assert rows[0]["per_window_latency"] <= rows[1]["per_window_latency"]
    by_name = {r["model"]: r for r in rows}
    assert by_name["b"]["peak_memory"] == "unavailable"
    assert "unavailable" in csv_text and len(json.loads(json_text)) == 2
    with pytest.raises(ValueError):
        compare([a])


def test_knn_latency_grows_with_training_size_forest_does_not():
    from plantstress.learn import fit_forest, fit_knn
    rng = np.random.default_rng(2)
    Q = rng.normal(size=(200, 4))
    lat = {}
    for n in (200, 4000):
        X, y = rng.normal(size=(n, 4)), rng.integers(0, 2, n)
        knn = fit_knn(X, y)
        forest = fit_forest(X, y, n_trees=20, max_depth=6)
        lat[("knn", n)] = bench_model(knn.predict, Q, repeats=5, measure_memory=False).wall_min
        lat[("forest", n)] = bench_model(forest.predict, Q, repeats=5, measure_memory=False).wall_min
    assert lat[("knn", 4000)] > 3 * lat[("knn", 200)]
    assert lat[("forest", 4000)] < 2 * lat[("forest", 200)]
