import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from plantstress.config import RunConfig
from plantstress.domain import DomainError
from plantstress.ingest import RangeSpec
from plantstress.preprocess import PreprocessConfig
from plantstress.synth import SynthConfig


def test_defaults_equal_module_defaults():
    cfg = RunConfig()
    assert cfg.synth_config() == SynthConfig()
    assert cfg.preprocess_config() == PreprocessConfig()
    assert cfg.range_spec() == RangeSpec()


def test_empty_text_is_default():
    assert RunConfig.from_text("") == RunConfig()


def test_parse_print_parse():
    text = "[run]\nseed = 7\n[synth]\nrootstocks = Thomas,PP40\nmissing_rate = 0.05\n" \
           "end_date = 2024-02-01\n[learn]\nlevel2 = knn\n"
    cfg = RunConfig.from_text(text)
    assert cfg.run.seed == 7 and cfg.synth.missing_rate == 0.05 and cfg.learn.level2 == "knn"
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg and again.to_text() == cfg.to_text()
    assert len(cfg.synth_config().rootstocks) == 2


@given(st.integers(0, 2 ** 31), st.floats(0, 0.99), st.floats(1e-6, 10), st.sampled_from(["forest", "knn", "svm"]))
def test_roundtrip_property(seed, rate, sigma, l2):
    cfg = RunConfig()
    cfg.run.seed, cfg.synth.missing_rate, cfg.eval.noise_sigma, cfg.learn.level2 = seed, rate, sigma, l2
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_unknown_keys_and_bad_values():
    with pytest.raises(DomainError):
        RunConfig.from_text("[nope]\na = 1\n")
    with pytest.raises(DomainError):
        RunConfig.from_text("[run]\nsead = 1\n")
    with pytest.raises(DomainError):
        RunConfig.from_text("[run]\nseed = seven\n")


def test_set_override():
    cfg = RunConfig()
    cfg.set("eval.n_perm", "250")
    cfg.set("run.seed", 3)
    assert cfg.eval.n_perm == 250 and cfg.run.seed == 3
    assert dataclasses.asdict(RunConfig())["eval"]["n_perm"] == 1000
