"""Glue between modules: labeled window arrays, splits, standard experiments."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import evaluation as ev
from . import spectral
from .domain import PAIRS, TREATMENTS, SplitSpec, Treatment, stack_windows
from .features import feature_matrix
from .ingest import index_metas
from .learn.hierarchical import TREATMENT_PAIR, fit_flat, fit_hierarchical, predict_flat
from .learn.linear import fit_svm
from .preprocess import PreprocessConfig, preprocess
from .synth import SynthConfig, gen_soil, plant_metas

# train: late Dec to mid-March; test: mid-March to late April
DEFAULT_SPLIT = SplitSpec((dt.date(2023, 12, 20), dt.date(2024, 3, 15)),
                          (dt.date(2024, 3, 15), dt.date(2024, 4, 26)))
# no symptoms / first symptoms / severe tip burn
PERIOD_BOUNDARIES = (dt.date(2023, 12, 20), dt.date(2024, 2, 25), dt.date(2024, 3, 15),
                     dt.date(2024, 4, 26))
TREATMENT_NAMES = [t.value for t in TREATMENTS]
PAIR_NAMES = [p.value for p in PAIRS]


@dataclass
class WindowSet:
    """Stacked windows with aligned labels."""

    X: np.ndarray  # (n, 48, 2)
    y: np.ndarray  # treatment ids
    dates: np.ndarray
    plant_ids: np.ndarray

    def __len__(self):
        return self.y.size

    @property
    def pairs(self):
        return TREATMENT_PAIR[self.y]

    def subset(self, mask):
        return WindowSet(self.X[mask], self.y[mask], self.dates[mask], self.plant_ids[mask])

    def period(self, start, end):
        return self.subset((self.dates >= start) & (self.dates < end))


def label_windows(windows, metas) -> WindowSet:
    """Attach treatment ids; windows of unlabeled plants are dropped."""
    index = index_metas(metas)
    keep = [w for w in windows if w.plant_id in index]
    return WindowSet(
        stack_windows(keep),
        np.array([TREATMENTS.index(index[w.plant_id].treatment) for w in keep], dtype=np.int64),
        np.array([w.date for w in keep], dtype=object),
        np.array([w.plant_id for w in keep], dtype=object),
    )


def split(ws: WindowSet, spec: SplitSpec = DEFAULT_SPLIT):
    return ws.period(*spec.train_period), ws.period(*spec.test_period)


def synthetic_windows(cfg: SynthConfig, pcfg: PreprocessConfig = PreprocessConfig(), readings=None):
    """Generate (or take) soil readings and run the preprocessing recipe."""
    if readings is None:
        readings, metas = gen_soil(cfg)
    else:
        metas = plant_metas(cfg)
    windows, _ = preprocess(readings, pcfg)
    return label_windows(windows, metas)


def evaluate_hierarchical(model, test: WindowSet, noise_sigma=0.0, seed=0, split_name="test"):
    """4-class report with the level-1 pair report and consistency checks in ``extra``."""
    pairs, pred = model.predict_detail(test.X, noise_sigma=noise_sigma, seed=seed)
    report = ev.EvalReport.from_predictions(
        test.y, pred, len(TREATMENTS), seed=model.seed, split=split_name,
        model=f"hierarchical/{model.level1_kind}+{model.level2_kind}/{model.feature_set.value}",
        class_names=TREATMENT_NAMES)
    level1 = ev.EvalReport.from_predictions(test.pairs, pairs, len(PAIRS), seed=model.seed,
                                            split=split_name, model="level1",
                                            class_names=PAIR_NAMES)
    violations = int(np.count_nonzero(TREATMENT_PAIR[pred] != pairs))
    report.extra = {"level1": level1.to_dict(), "pair_violations": violations,
                    "n_windows": int(test.y.size), "noise_sigma": noise_sigma}
    return report


def flat_accuracy(kind, train: WindowSet, test: WindowSet, feature_set="f2", seed=0):
    model = fit_flat(kind, train.X, train.y, feature_set, seed)
    return float(np.mean(predict_flat(model, test.X, feature_set) == test.y))


def train_test_hierarchical(cfg: SynthConfig, level1="resnet", level2="forest", feature_set="f2",
                            seed=None, spec=DEFAULT_SPLIT, level1_hyper=None):
    ws = synthetic_windows(cfg)
    train, test = split(ws, spec)
    model = fit_hierarchical(train.X, train.y, level1, level2, feature_set,
                             cfg.seed if seed is None else seed, level1_hyper)
    return model, train, test


# -- spectra ------------------------------------------------------------------

def spectral_arrays(samples, metas, treatments=(Treatment.CONTROL, Treatment.SALINITY)):
    """Reflectance matrix and group codes (index into ``treatments``)."""
    index = index_metas(metas)
    treatments = list(treatments)
    keep = [s for s in samples if s.plant_id in index and index[s.plant_id].treatment in treatments]
    X = np.stack([s.reflectance for s in keep]) if keep else np.zeros((0, 288))
    y = np.array([treatments.index(index[s.plant_id].treatment) for s in keep], dtype=np.int64)
    return X, y, keep


def svm_fit_predict(pca_components=None, **svm_kw):
    """``fit_predict`` closure for cross-validation, optionally after PCA."""

    def run(Xtr, ytr, Xte):
        if pca_components:
            pca = spectral.pca_fit(Xtr, pca_components)
            Xtr, Xte = spectral.pca_transform(pca, Xtr), spectral.pca_transform(pca, Xte)
        return fit_svm(Xtr, ytr, **svm_kw).predict(Xte)

    return run


def mvpa_permutation(X, y, n_perm=1000, seed=0, k=5, pca_components=None, n_jobs=1, **svm_kw):
    return ev.permutation_test(svm_fit_predict(pca_components, **svm_kw), X, y, n_perm, seed, k, n_jobs)


def index_anova(samples, y, name, mode="permutation", n_perm=2000, seed=0):
    """ANOVA p-value of one spectral index across the groups coded in ``y``."""
    v = spectral.index_values(samples, name)
    return spectral.anova_p([v[y == g] for g in np.unique(y)], mode, n_perm, seed)


def moment_features(ws: WindowSet, fset="f2"):
    return feature_matrix(ws.X, fset)[0]
