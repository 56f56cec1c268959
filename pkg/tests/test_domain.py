import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plantstress.domain import (
    PAIR_MEMBERS,
    DailyWindow,
    DomainError,
    PairLabel,
    PlantMeta,
    Rootstock,
    SoilReading,
    SpectralSample,
    SplitSpec,
    Treatment,
    leaf_ec,
    stack_windows,
    treatment_to_pair,
)


@pytest.mark.parametrize("t,pair", [
    (Treatment.CONTROL, PairLabel.PAIR_A),
    (Treatment.PRR, PairLabel.PAIR_A),
    (Treatment.SALINITY, PairLabel.PAIR_B),
    (Treatment.SALINITY_PRR, PairLabel.PAIR_B),
])
def test_treatment_to_pair(t, pair):
    assert treatment_to_pair(t) is pair


def test_pair_map_surjective_and_matches_members():
    assert {treatment_to_pair(t) for t in Treatment} == set(PairLabel)
    for pair, members in PAIR_MEMBERS.items():
        assert all(treatment_to_pair(t) is pair for t in members)


def test_parse_is_case_insensitive_and_strict():
    assert Rootstock.parse(" pp40 ") is Rootstock.PP40
    assert Treatment.parse("salinityprr") is Treatment.SALINITY_PRR
    assert PairLabel.parse("PairB") is PairLabel.PAIR_B
    with pytest.raises(DomainError):
        Treatment.parse("drought")


def test_plant_meta_pair():
    assert PlantMeta("T-03", Rootstock.THOMAS, Treatment.PRR).pair is PairLabel.PAIR_A


def test_leaf_ec_hand_value():
    assert leaf_ec(1.0e7, 0.25, 0.01) == pytest.approx(2.5e-6, rel=1e-12)


def test_leaf_ec_inverse_in_resistance():
    assert leaf_ec(1.0e8, 0.25, 0.01) == pytest.approx(leaf_ec(1.0e7, 0.25, 0.01) / 10, rel=1e-12)


@pytest.mark.parametrize("args,name", [((0.0, 0.25, 0.01), "r2"), ((1e7, -1, 0.01), "l"),
                                       ((1e7, 0.25, math.inf), "a"), ((math.nan, 1, 1), "r2")])
def test_leaf_ec_domain_errors(args, name):
    with pytest.raises(DomainError, match=name):
        leaf_ec(*args)


pos = st.floats(min_value=1e-6, max_value=1e9, allow_nan=False, allow_infinity=False)


@given(pos, pos, pos)
def test_leaf_ec_roundtrip_property(r2, l, a):
    assert leaf_ec(r2, l, a) * r2 * a == pytest.approx(l, rel=1e-12)


def test_soil_reading_validation():
    SoilReading(1.7e9, "T-C-01", 150.0, -3.0)  # ranges are ingest's business
    with pytest.raises(DomainError):
        SoilReading(1.7e9, "T-C-01", math.nan, 1.0)
    with pytest.raises(DomainError):
        SoilReading(0.0, "T-C-01", 1.0, 1.0)


def test_spectral_sample_shape_and_readonly():
    s = SpectralSample("p", dt.date(2024, 1, 1), 1, np.ones(288))
    assert not s.reflectance.flags.writeable
    with pytest.raises(DomainError):
        SpectralSample("p", dt.date(2024, 1, 1), 1, np.ones(287))
    bad = np.ones(288)
    bad[5] = -0.1
    with pytest.raises(DomainError):
        SpectralSample("p", dt.date(2024, 1, 1), 1, bad)


def test_daily_window_shape():
    w = DailyWindow("p", dt.date(2024, 1, 1), np.zeros((48, 2)), (1, 0))
    assert w.degenerate_flags == (True, False)
    with pytest.raises(DomainError):
        DailyWindow("p", dt.date(2024, 1, 1), np.zeros((47, 2)))
    with pytest.raises(DomainError):
        DailyWindow("p", dt.date(2024, 1, 1), np.full((48, 2), np.nan))
    assert stack_windows([w, w]).shape == (2, 48, 2)
    assert stack_windows([]).shape == (0, 48, 2)


def test_split_spec():
    d = dt.date
    s = SplitSpec((d(2024, 1, 1), d(2024, 2, 1)), (d(2024, 2, 1), d(2024, 3, 1)))
    assert s.in_train(d(2024, 1, 31)) and not s.in_train(d(2024, 2, 1))
    assert s.in_test(d(2024, 2, 1))
    with pytest.raises(DomainError):
        SplitSpec((d(2024, 1, 1), d(2024, 2, 2)), (d(2024, 2, 1), d(2024, 3, 1)))
