"""Run configuration: typed key-value sections in INI syntax.

Example::

    [run]
    seed = 7

    [paths]
    soil = data/soil.csv

    [synth]
    rootstocks = Thomas,PP40
    missing_rate = 0.05

Every key defaults to the module-level default, so an empty file is valid.
"""

from __future__ import annotations

import configparser
import dataclasses
import datetime as dt
from dataclasses import dataclass, field, fields

from .domain import DomainError, Rootstock
from .ingest import RangeSpec
from .preprocess import PreprocessConfig
from .synth import DEFAULT_ATTENUATION, DEFAULT_SIGNAL_CHANNELS, DEFAULT_SPECTRAL_AMPLITUDE, SynthConfig


@dataclass
class RunSection:
    seed: int = 0
    threads: int = 1


@dataclass
class PathsSection:
    # empty means "not given"; CLI flags fill these in
    soil: str = ""
    spectral: str = ""
    labels: str = ""
    windows: str = ""
    model: str = ""
    out: str = "out"


@dataclass
class SynthSection:
    n_plants_per_cell: int = 6
    rootstocks: str = "Thomas"
    start_date: dt.date = dt.date(2023, 12, 20)
    end_date: dt.date = dt.date(2024, 4, 26)
    salinity_ec_shift: float = 600.0
    salinity_skew_shift: float = 0.1
    prr_kurtosis_shift: float = 0.5
    prr_moisture_decay_factor: float = 0.6
    attenuation_thomas: float = DEFAULT_ATTENUATION[Rootstock.THOMAS]
    attenuation_pp40: float = DEFAULT_ATTENUATION[Rootstock.PP40]
    attenuation_pp45: float = DEFAULT_ATTENUATION[Rootstock.PP45]
    noise_sigma: float = 0.05
    missing_rate: float = 0.0
    effect_ramp: float = 1.0
    day_jitter: float = 0.15
    spectral_session_days: int = 7
    spectral_amplitude: float = DEFAULT_SPECTRAL_AMPLITUDE
    spectral_signal_channels: int = DEFAULT_SIGNAL_CHANNELS


@dataclass
class IngestSection:
    moisture_min: float = 0.0
    moisture_max: float = 100.0
    ec_min: float = 0.0
    ec_max: float = 20000.0


@dataclass
class PreprocessSection:
    grid_step: int = 1800
    smoothing_window: int = 20
    max_missing_fraction_per_day: float = 0.5
    utc_offset_hours: float = 0.0


@dataclass
class LearnSection:
    level1: str = "resnet"
    level2: str = "forest"
    features: str = "f2"
    resnet_epochs: int = 12
    resnet_batch_size: int = 32
    resnet_lr: float = 0.01
    train_start: dt.date = dt.date(2023, 12, 20)
    train_end: dt.date = dt.date(2024, 3, 15)
    test_start: dt.date = dt.date(2024, 3, 15)
    test_end: dt.date = dt.date(2024, 4, 26)


@dataclass
class EvalSection:
    n_perm: int = 1000
    folds: int = 5
    groups: str = "Control,Salinity"
    mask_fraction: float = 0.0
    noise_sigma: float = 0.0
    bench_repeats: int = 20


SECTIONS = {
    "run": RunSection,
    "paths": PathsSection,
    "synth": SynthSection,
    "ingest": IngestSection,
    "preprocess": PreprocessSection,
    "learn": LearnSection,
    "eval": EvalSection,
}


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    paths: PathsSection = field(default_factory=PathsSection)
    synth: SynthSection = field(default_factory=SynthSection)
    ingest: IngestSection = field(default_factory=IngestSection)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    learn: LearnSection = field(default_factory=LearnSection)
    eval: EvalSection = field(default_factory=EvalSection)

    # -- conversions to module configs
    def synth_config(self) -> SynthConfig:
        s = self.synth
        return SynthConfig(
            n_plants_per_cell=s.n_plants_per_cell,
            rootstocks=tuple(Rootstock.parse(r) for r in s.rootstocks.split(",") if r.strip()),
            start_date=s.start_date, end_date=s.end_date,
            salinity_ec_shift=s.salinity_ec_shift, salinity_skew_shift=s.salinity_skew_shift,
            prr_kurtosis_shift=s.prr_kurtosis_shift,
            prr_moisture_decay_factor=s.prr_moisture_decay_factor,
            rootstock_attenuation={Rootstock.THOMAS: s.attenuation_thomas,
                                   Rootstock.PP40: s.attenuation_pp40,
                                   Rootstock.PP45: s.attenuation_pp45},
            noise_sigma=s.noise_sigma, missing_rate=s.missing_rate, seed=self.run.seed,
            effect_ramp=s.effect_ramp, day_jitter=s.day_jitter,
            spectral_session_days=s.spectral_session_days)

    def range_spec(self) -> RangeSpec:
        return RangeSpec(**dataclasses.asdict(self.ingest))

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(**dataclasses.asdict(self.preprocess))

    # -- text form
    def to_text(self) -> str:
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            section = getattr(self, name)
            for f in fields(section):
                lines.append(f"{f.name} = {_format(getattr(section, f.name))}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser.read_string(text)
        cfg = cls()
        for name in parser.sections():
            if name not in SECTIONS:
                raise DomainError(f"unknown config section [{name}]")
            section = getattr(cfg, name)
            types = {f.name: f.type for f in fields(section)}
            for key, raw in parser.items(name):
                if key not in types:
                    raise DomainError(f"unknown key {key!r} in [{name}]")
                setattr(section, key, _parse(types[key], raw, f"{name}.{key}"))
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_dict(self):
        return {name: {k: _format(v) for k, v in dataclasses.asdict(getattr(self, name)).items()}
                for name in SECTIONS}

    def set(self, dotted: str, value):
        """Override ``section.key`` with an already-typed or textual value."""
        name, key = dotted.split(".", 1)
        section = getattr(self, name)
        types = {f.name: f.type for f in fields(section)}
        if isinstance(value, str):
            value = _parse(types[key], value, dotted)
        setattr(section, key, value)


def _format(value):
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(type_name, raw, where):
    raw = raw.strip()
    try:
        if type_name in ("int", int):
            return int(raw)
        if type_name in ("float", float):
            return float(raw)
        if type_name in ("dt.date", dt.date):
            return dt.date.fromisoformat(raw)
        if type_name in ("bool", bool):
            return raw.lower() in ("1", "true", "yes", "on")
        return raw
    except ValueError as exc:
        raise DomainError(f"bad value for {where}: {raw!r}") from exc
