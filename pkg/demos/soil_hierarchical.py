"""Soil-sensor stress detection: hierarchical model versus flat baselines.

Generates one synthetic season of half-hourly moisture/EC readings for a
Thomas-rootstock trial, turns it into daily windows, trains the two-level
classifier (first decide Control/Salinity versus Control/PRR, then the
treatment within the pair) and compares it with single-level models on the
mid-March to late-April test period. Finishes with a robustness check:
feature noise and 20% of raw readings dropped.

    python demos/soil_hierarchical.py [seed]
"""

import sys

from plantstress import pipeline
from plantstress.evaluation import perturb
from plantstress.learn import fit_hierarchical
from plantstress.synth import SynthConfig, gen_soil

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = SynthConfig(seed=seed)
readings, metas = gen_soil(cfg)
ws = pipeline.synthetic_windows(cfg, readings=readings)
train, test = pipeline.split(ws)
print(f"{len(readings)} readings -> {len(ws)} daily windows ({len(train)} train / {len(test)} test)")

model = fit_hierarchical(train.X, train.y, seed=seed)
clean = pipeline.evaluate_hierarchical(model, test, seed=seed)
print(f"hierarchical  accuracy {clean.accuracy:.3f}  (pair level {clean.extra['level1']['accuracy']:.3f})")
for kind in ("forest", "knn", "svm"):
    print(f"flat {kind:<7}  accuracy {pipeline.flat_accuracy(kind, train, test, 'f2', seed):.3f}")

noisy = pipeline.evaluate_hierarchical(model, test, noise_sigma=0.05, seed=seed)
masked = pipeline.split(pipeline.synthetic_windows(cfg, readings=perturb(readings, mask_fraction=0.2, seed=seed)))[1]
masked = pipeline.evaluate_hierarchical(model, masked, seed=seed)
print(f"robustness: clean {clean.accuracy:.3f}, noise 0.05 {noisy.accuracy:.3f}, 20% masked {masked.accuracy:.3f}")
f1 = clean.to_dict()["per_class"]["f1"]
print("per-class F1:", {n: round(v, 3) for n, v in zip(pipeline.TREATMENT_NAMES, f1)})
