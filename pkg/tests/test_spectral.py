import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from plantstress.domain import DomainError
from plantstress.spectral import (
    WAVELENGTHS,
    DegenerateIndexError,
    anova_f,
    anova_p,
    channel_of,
    n1,
    ndsi,
    ni,
    pca_fit,
    pca_inverse,
    pca_transform,
    sw_scan,
)
from plantstress.synth import SynthConfig, gen_spectral


def spectrum(**bands):
    r = np.full(288, 0.3)
    for nm, v in bands.items():
        r[channel_of(float(nm[1:]))] = v
    return r


def test_grid_endpoints_and_nearest():
    assert channel_of(340) == 0 and channel_of(850) == 287
    # 595 nm sits exactly halfway between channels 143 and 144
    assert channel_of(595) == 143
    assert WAVELENGTHS[143] == pytest.approx(340 + 143 * 510 / 287, rel=1e-15)
    with pytest.raises(DomainError):
        channel_of(900)


def test_channel_tie_goes_low():
    mid = (WAVELENGTHS[10] + WAVELENGTHS[11]) / 2
    assert channel_of(mid) == 10


def test_index_hand_values():
    assert ndsi(spectrum(r665=0.4, r842=0.4)) == 0.0
    assert ndsi(spectrum(r665=0.2, r842=0.6)) == pytest.approx(-0.5, rel=1e-12)
    assert ndsi(spectrum(r665=0.2, r842=0.0)) == 1.0
    assert ni(spectrum(r705=0.5, r750=0.5)) == 0.0
    assert n1(spectrum(r600=0.3, r800=0.1)) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(DegenerateIndexError):
        n1(spectrum(r600=0.0, r800=0.0))


spectra = arrays(np.float64, 288, elements=st.just(0.0) | st.floats(1e-6, 10))


@given(spectra, st.floats(1e-3, 1e3))
def test_index_bounds_and_scale_invariance(r, c):
    for f in (ndsi, ni, n1):
        try:
            v = f(r)
        except DegenerateIndexError:
            continue
        assert -1 <= v <= 1
        assert f(r * c) == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_anova_hand_values():
    assert anova_f([[1, 2, 3], [2, 3, 4]]) == pytest.approx(1.5, rel=1e-12)
    assert anova_f([[1, 3], [3, 1]]) == 0.0
    with pytest.raises(DomainError):
        anova_f([[0, 0], [1, 1]])
    with pytest.raises(DomainError):
        anova_f([[1, 2, 3]])


def test_anova_matches_scipy_and_analytic_p():
    rng = np.random.default_rng(0)
    for _ in range(50):
        groups = [rng.normal(rng.normal(), 1, rng.integers(2, 15)) for _ in range(rng.integers(2, 5))]
        ref = stats.f_oneway(*groups)
        assert anova_f(groups) == pytest.approx(ref.statistic, rel=1e-10)
        assert anova_p(groups, "analytic") == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-15)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=10), st.lists(st.floats(-100, 100), min_size=3, max_size=10),
       st.floats(0.1, 100) | st.floats(-100, -0.1), st.floats(-1e3, 1e3))
def test_anova_affine_invariance(a, b, scale, shift):
    try:
        F = anova_f([a, b])
    except DomainError:
        return
    if np.var(a) + np.var(b) < 1e-6:
        return
    F2 = anova_f([np.array(a) * scale + shift, np.array(b) * scale + shift])
    assert F2 == pytest.approx(F, rel=1e-7, abs=1e-9)


def test_permutation_p_extremes():
    rng = np.random.default_rng(1)
    g = [rng.normal(0, 0.01, 20), 10 + rng.normal(0, 0.01, 20)]
    p = anova_p(g, n_perm=2000, seed=3)
    assert p == pytest.approx(1 / 2001)
    assert 0 < anova_p([rng.normal(size=10), rng.normal(size=10)], n_perm=200) <= 1


def test_permutation_calibration():
    rng = np.random.default_rng(2)
    hits = sum(anova_p([rng.normal(size=12), rng.normal(size=12)], n_perm=200, seed=i) < 0.05
               for i in range(100))
    assert hits <= 15


def test_sw_scan_planted_channel_and_degenerate():
    rng = np.random.default_rng(3)
    a = rng.normal(0.3, 0.01, (15, 288))
    b = rng.normal(0.3, 0.01, (15, 288))
    b[:, 50] += 0.2
    res = sw_scan([a, b], "permutation", 500, 0)
    assert res.p_values[50] < 0.01 and res.argmin == 50
    res = sw_scan([a, b], "analytic")
    assert res.adjusted_min < 0.01
    same = np.ones((4, 288))
    res = sw_scan([same, same], "analytic")
    assert res.degenerate.all() and res.adjusted_min == 1.0


def test_sw_scan_null_mostly_above_threshold():
    cfg = SynthConfig(n_plants_per_cell=6, end_date=dt.date(2023, 12, 27))
    high = 0
    for seed in range(10):
        samples = gen_spectral(cfg.replace(seed=seed), amplitude=0.0)
        groups = {}
        for s in samples:
            groups.setdefault(s.plant_id.split("-")[1], []).append(s.reflectance)
        res = sw_scan([np.array(groups["C"]), np.array(groups["S"])], "analytic")
        high += res.adjusted_min > 0.05
    assert high >= 9


def test_pca_vs_eigensolver():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 10)) @ rng.normal(size=(10, 10))
    m = pca_fit(X, 10)
    ev = np.sort(np.linalg.eigvalsh(np.cov(X, rowvar=False)))[::-1]
    assert np.allclose(m.explained_variance, ev, rtol=1e-6)
    assert np.allclose(m.components @ m.components.T, np.eye(10), atol=1e-8)
    assert m.explained_variance.sum() == pytest.approx(m.total_variance, rel=1e-8)
    scores = pca_transform(m, X)
    assert np.all(np.abs(scores.mean(axis=0)) < 1e-9)
    for row in m.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_pca_rank_one_line():
    t = np.linspace(-1, 1, 20)[:, None]
    X = np.array([1.0, 2.0, -0.5]) + t * np.array([0.3, -1.0, 2.0])
    m = pca_fit(X, 1)
    assert np.abs(pca_inverse(m, pca_transform(m, X)) - X).max() < 1e-8


def test_pca_bad_k():
    with pytest.raises(ValueError):
        pca_fit(np.zeros((5, 3)), 4)
