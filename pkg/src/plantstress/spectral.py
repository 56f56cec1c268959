"""Spectral indices, single-wavelength ANOVA scans and PCA."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from .domain import N_CHANNELS, DomainError

log = logging.getLogger(__name__)

LAMBDA_MIN = 340.0
LAMBDA_MAX = 850.0
WAVELENGTHS = LAMBDA_MIN + np.arange(N_CHANNELS) * ((LAMBDA_MAX - LAMBDA_MIN) / (N_CHANNELS - 1))

# (numerator, subtracted) wavelength pairs in nm
INDEX_BANDS = {
    "ndsi": (665.0, 842.0),
    "ni": (705.0, 750.0),
    "n1": (600.0, 800.0),
}


class DegenerateIndexError(DomainError):
    pass


def channel_of(wavelength: float) -> int:
    """Nearest grid channel to ``wavelength`` nm; exact ties go to the lower index."""
    if not (LAMBDA_MIN <= wavelength <= LAMBDA_MAX):
        raise DomainError(f"wavelength {wavelength} nm outside {LAMBDA_MIN:g}-{LAMBDA_MAX:g} nm")
    pos = (wavelength - LAMBDA_MIN) * (N_CHANNELS - 1) / (LAMBDA_MAX - LAMBDA_MIN)
    lo = int(np.floor(pos))
    if lo >= N_CHANNELS - 1:
        return N_CHANNELS - 1
    return lo if pos - lo <= 0.5 else lo + 1


def _reflectance(s):
    return s.reflectance if hasattr(s, "reflectance") else np.asarray(s, dtype=float)


def normalized_difference(s, band_a: float, band_b: float) -> float:
    r = _reflectance(s)
    a, b = r[channel_of(band_a)], r[channel_of(band_b)]
    if a + b == 0:
        raise DegenerateIndexError(f"R{band_a:g} + R{band_b:g} is zero")
    return float((a - b) / (a + b))


def ndsi(s):
    return normalized_difference(s, *INDEX_BANDS["ndsi"])


def ni(s):
    return normalized_difference(s, *INDEX_BANDS["ni"])


def n1(s):
    return normalized_difference(s, *INDEX_BANDS["n1"])


INDEX_FUNCS = {"ndsi": ndsi, "ni": ni, "n1": n1}


def index_values(samples, name):
    f = INDEX_FUNCS[name]
    return np.array([f(s) for s in samples])


# -- one-way ANOVA ------------------------------------------------------------

def _check_groups(groups):
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise DomainError("ANOVA needs at least two groups")
    if any(g.size < 2 for g in groups):
        raise DomainError("each ANOVA group needs at least two values")
    return groups


def anova_f(groups) -> float:
    """Classical one-way F = MS_between / MS_within."""
    groups = _check_groups(groups)
    F = _f_from_matrix(np.concatenate(groups)[None, :], _group_codes(groups))[0]
    if not np.isfinite(F):
        raise DomainError("within-group variance is zero; F is undefined")
    return float(F)


def _group_codes(groups):
    return np.concatenate([np.full(g.size, i) for i, g in enumerate(groups)])


def _f_from_matrix(values, codes):
    """F statistic for each row of ``values`` (rows share the group coding)."""
    k = int(codes.max()) + 1
    n = codes.size
    onehot = np.eye(k)[codes]
    counts = onehot.sum(axis=0)
    grand = values.mean(axis=1, keepdims=True)
    centred = values - grand
    means = centred @ onehot / counts
    ss_between = (means ** 2 * counts).sum(axis=1)
    ss_total = (centred ** 2).sum(axis=1)
    ss_within = np.maximum(ss_total - ss_between, 0.0)
    # relative floor: within-group scatter below rounding noise counts as zero
    ss_within = np.where(ss_within <= 1e-13 * np.maximum(ss_total, 1e-300), 0.0, ss_within)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (ss_between / (k - 1)) / (ss_within / (n - k))


def anova_p(groups, mode="permutation", n_perm=2000, seed=0) -> float:
    """p-value of the one-way ANOVA F test.

    ``permutation`` shuffles the group labels and uses the add-one estimate
    ``(1 + #{F_perm >= F_obs}) / (1 + n_perm)``; ``analytic`` uses the
    F distribution tail via the regularized incomplete beta function.
    """
    groups = _check_groups(groups)
    values = np.concatenate(groups)
    codes = _group_codes(groups)
    F = _f_from_matrix(values[None, :], codes)[0]
    if not np.isfinite(F):
        raise DomainError("within-group variance is zero; F is undefined")
    if mode == "analytic":
        k, n = len(groups), values.size
        d1, d2 = k - 1, n - k
        return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * F)))
    if mode != "permutation":
        raise ValueError(f"unknown ANOVA p-value mode {mode!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    perms = rng.permuted(np.tile(codes, (n_perm, 1)), axis=1)
    null = _perm_f(values, perms)
    return float((1 + np.count_nonzero(null >= F * (1 - 1e-12))) / (1 + n_perm))


def _perm_f(values, perm_codes):
    """F for one value vector under many group codings (rows of perm_codes)."""
    k = int(perm_codes.max()) + 1
    n = values.size
    centred = values - values.mean()
    ss_total = (centred ** 2).sum()
    ss_between = np.zeros(perm_codes.shape[0])
    for g in range(k):
        mask = perm_codes == g
        cnt = mask.sum(axis=1)
        s = (mask * centred).sum(axis=1)
        ss_between += s * s / cnt
    ss_within = np.maximum(ss_total - ss_between, 1e-300)
    return (ss_between / (k - 1)) / (ss_within / (n - k))


@dataclass
class ScanResult:
    p_values: np.ndarray
    degenerate: np.ndarray
    adjusted_min: float
    argmin: int

    def to_dict(self):
        return {
            "adjusted_min": self.adjusted_min,
            "argmin_channel": self.argmin,
            "argmin_wavelength_nm": float(WAVELENGTHS[self.argmin]),
            "n_degenerate": int(self.degenerate.sum()),
            "p_values": [float(p) for p in self.p_values],
        }


def sw_scan(groups, mode="permutation", n_perm=2000, seed=0) -> ScanResult:
    """ANOVA p-value at every channel, plus the Bonferroni-adjusted minimum.

    ``groups`` is a list of (n_i, 288) reflectance arrays. Channels where the
    F statistic is undefined get p = 1 and are flagged degenerate.
    """
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(g.shape[0] < 2 for g in groups):
        raise DomainError("scan needs >= 2 groups with >= 2 samples each")
    values = np.concatenate(groups, axis=0).T  # channels x samples
    codes = _group_codes([g[:, 0] for g in groups])
    F = _f_from_matrix(values, codes)
    degenerate = ~np.isfinite(F)
    n_ch = values.shape[0]
    p = np.ones(n_ch)
    if mode == "analytic":
        k, n = len(groups), codes.size
        d1, d2 = k - 1, n - k
        ok = ~degenerate
        p[ok] = special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * F[ok]))
    elif mode == "permutation":
        rng = np.random.Generator(np.random.PCG64(seed))
        perms = rng.permuted(np.tile(codes, (n_perm, 1)), axis=1)
        onehots = np.eye(len(groups))[perms]  # n_perm x n x k
        counts = onehots.sum(axis=1)  # n_perm x k
        centred = values - values.mean(axis=1, keepdims=True)
        ss_total = (centred ** 2).sum(axis=1)
        exceed = np.zeros(n_ch, dtype=np.int64)
        for start in range(0, n_perm, 100):
            oh = onehots[start:start + 100]
            sums = np.einsum("cn,pnk->pck", centred, oh)
            ssb = (sums ** 2 / counts[start:start + 100, None, :]).sum(axis=2)
            ssw = np.maximum(ss_total - ssb, 1e-300)
            k, n = len(groups), codes.size
            Fp = (ssb / (k - 1)) / (ssw / (n - k))
            exceed += (Fp >= F * (1 - 1e-12)).sum(axis=0)
        p = np.where(degenerate, 1.0, (1 + exceed) / (1 + n_perm))
    else:
        raise ValueError(f"unknown ANOVA p-value mode {mode!r}")
    if degenerate.any():
        log.warning("%d channels have undefined F (zero within-group variance)", degenerate.sum())
    j = int(np.argmin(p))
    return ScanResult(p, degenerate, float(min(1.0, n_ch * p[j])), j)


# -- PCA ----------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def explained_variance_ratio(self):
        return self.explained_variance / self.total_variance

    def to_dict(self):
        return {"mean": self.mean.tolist(), "components": self.components.tolist(),
                "explained_variance": self.explained_variance.tolist(),
                "total_variance": self.total_variance}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"]), np.array(d["components"]),
                   np.array(d["explained_variance"]), float(d["total_variance"]))


def pca_fit(X, k: int) -> PcaModel:
    """Top-k principal directions via SVD of the centred data.

    Each component is signed so its largest-magnitude entry is positive.
    Variances use the n-1 (sample covariance) normalisation.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two samples")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k must be in [1, {min(n - 1, d)}], got {k}")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    var = s ** 2 / (n - 1)
    return PcaModel(mean, comps, var[:k], float(var.sum()))


def pca_transform(model: PcaModel, X):
    return (np.asarray(X, dtype=float) - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, scores):
    return scores @ model.components + model.mean
