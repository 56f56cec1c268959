"""Inference cost of the hierarchical model and the flat baselines.

Each model predicts the same test windows 20 times; the table ranks them by
per-window latency and also lists wall-time CV, CPU share and peak traced
memory.

    python demos/benchmark.py [seed]
"""

import sys

from plantstress import pipeline
from plantstress.bench import bench_model, compare
from plantstress.learn import fit_flat, fit_hierarchical, predict_flat
from plantstress.synth import SynthConfig

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
train, test = pipeline.split(pipeline.synthetic_windows(SynthConfig(seed=seed)))
X = test.X

reports = [bench_model(fit_hierarchical(train.X, train.y, seed=seed).predict, X, name="hierarchical")]
for kind in ("forest", "knn", "svm"):
    m = fit_flat(kind, train.X, train.y, "f2", seed)
    reports.append(bench_model(lambda w, m=m: predict_flat(m, w, "f2"), X, name=f"flat-{kind}"))

rows, csv_text, _ = compare(reports)
print(f"{len(X)} windows, 20 timed repeats each\n")
print(csv_text)
for r in reports:
    if r.unstable:
        print(f"note: {r.model} timings vary a lot (CV {r.wall_cv:.2f})")
