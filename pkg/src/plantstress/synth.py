"""Seeded synthetic greenhouse data with planted treatment effects.

Random streams use numpy's PCG64 bit generator seeded through a
``SeedSequence`` built from ``(seed, crc32(plant_id), stream tag)``. PCG64
output is specified bit-for-bit, so fixtures are identical across platforms,
and each plant's stream is independent of generation order.

Soil model (per plant, 30-minute slots, watering once a day at 08:00)::

    moisture = floor + amp * exp(-k_m * s / 48)          s = slots since watering
    ec       = base + pulse * exp(-k_e * s / 48)

Salinity raises ``base`` (mean EC shift) and ``k_e`` (skew shift). PRR slows
the moisture decay (``k_m`` scaled by the decay factor) and sharpens the EC
pulse (``k_e`` scaled by ``1 + prr_kurtosis_shift``). PRR effects are the same
with or without salinity. Every effect is multiplied by the rootstock
attenuation and by a linear onset ramp from ``effect_ramp`` at ``start_date``
to 1 at ``end_date``.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import zlib
from dataclasses import dataclass, field

import numpy as np

from .domain import N_CHANNELS, PlantMeta, Rootstock, SoilReading, SpectralSample, Treatment
from .ingest import day_start
from .spectral import WAVELENGTHS


class ConfigError(ValueError):
    pass


DEFAULT_ATTENUATION = {Rootstock.THOMAS: 1.0, Rootstock.PP40: 0.5, Rootstock.PP45: 0.05}
TREATMENT_CODES = {
    Treatment.CONTROL: "C",
    Treatment.SALINITY: "S",
    Treatment.PRR: "P",
    Treatment.SALINITY_PRR: "SP",
}

ROOTSTOCK_CODES = {Rootstock.THOMAS: "T", Rootstock.PP40: "P40", Rootstock.PP45: "P45"}

SLOTS_PER_DAY = 48
GRID_STEP = 1800
WATERING_SLOT = 16

MOISTURE_FLOOR = 22.0
MOISTURE_AMP = 18.0
MOISTURE_DECAY = 3.0
EC_BASE = 900.0
EC_PULSE = 150.0
EC_DECAY = 4.0
# channel scales that noise_sigma is relative to
MOISTURE_SCALE = 20.0
EC_SCALE = 200.0


@dataclass(frozen=True)
class SynthConfig:
    n_plants_per_cell: int = 6
    rootstocks: tuple = (Rootstock.THOMAS,)
    start_date: dt.date = dt.date(2023, 12, 20)
    end_date: dt.date = dt.date(2024, 4, 26)
    salinity_ec_shift: float = 600.0
    salinity_skew_shift: float = 0.1
    prr_kurtosis_shift: float = 0.5
    prr_moisture_decay_factor: float = 0.6
    rootstock_attenuation: dict = field(default_factory=lambda: dict(DEFAULT_ATTENUATION))
    noise_sigma: float = 0.05
    missing_rate: float = 0.0
    seed: int = 0
    # share of the full effect present at start_date (1.0 = constant effect)
    effect_ramp: float = 1.0
    # day-to-day variability of the decay rates (log-normal sigma)
    day_jitter: float = 0.15
    spectral_session_days: int = 7

    def __post_init__(self):
        if self.end_date <= self.start_date:
            raise ConfigError("end_date must be after start_date")
        if self.n_plants_per_cell < 1:
            raise ConfigError("n_plants_per_cell must be >= 1")
        if not self.rootstocks:
            raise ConfigError("need at least one rootstock")
        if not 0.0 < self.prr_moisture_decay_factor <= 1.0:
            raise ConfigError("prr_moisture_decay_factor must be in (0, 1]")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError("missing_rate must be in [0, 1)")
        if self.noise_sigma < 0 or self.day_jitter < 0:
            raise ConfigError("noise levels must be non-negative")
        if not 0.0 <= self.effect_ramp <= 1.0:
            raise ConfigError("effect_ramp must be in [0, 1]")
        for r in self.rootstocks:
            a = self.rootstock_attenuation.get(r)
            if a is None or not 0.0 <= a <= 1.0:
                raise ConfigError(f"attenuation for {r} must be in [0, 1]")
        if self.spectral_session_days < 1:
            raise ConfigError("spectral_session_days must be >= 1")

    def replace(self, **kw) -> "SynthConfig":
        return dataclasses.replace(self, **kw)

    @property
    def n_days(self) -> int:
        return (self.end_date - self.start_date).days


def zero_effect(cfg: SynthConfig) -> SynthConfig:
    """Same config with every planted treatment effect switched off."""
    return cfg.replace(salinity_ec_shift=0.0, salinity_skew_shift=0.0,
                       prr_kurtosis_shift=0.0, prr_moisture_decay_factor=1.0)


def plant_metas(cfg: SynthConfig):
    metas = []
    for root in cfg.rootstocks:
        for treat in Treatment:
            for i in range(cfg.n_plants_per_cell):
                pid = f"{ROOTSTOCK_CODES[root]}-{TREATMENT_CODES[treat]}-{i + 1:02d}"
                metas.append(PlantMeta(pid, root, treat))
    return metas


def plant_rng(seed: int, plant_id: str, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(plant_id.encode()), stream])
    return np.random.Generator(np.random.PCG64(ss))


def _ramp(cfg, day_index):
    if cfg.n_days <= 1:
        return np.ones_like(day_index, dtype=float)
    frac = day_index / (cfg.n_days - 1)
    return cfg.effect_ramp + (1.0 - cfg.effect_ramp) * frac


def soil_profile(cfg: SynthConfig, meta: PlantMeta, rng):
    """Noise-free plus noisy (n_days*48, 2) series for one plant."""
    att = cfg.rootstock_attenuation[meta.rootstock]
    n_days = cfg.n_days
    days = np.arange(n_days)
    effect = att * _ramp(cfg, days)  # per-day effect strength

    floor = MOISTURE_FLOOR + rng.normal(0, 2.0)
    amp = MOISTURE_AMP + rng.normal(0, 2.0)
    base = EC_BASE + rng.normal(0, 80.0)
    pulse = EC_PULSE + rng.normal(0, 15.0)

    k_m = np.full(n_days, MOISTURE_DECAY)
    k_e = np.full(n_days, EC_DECAY)
    ec_base = np.full(n_days, base)
    if meta.treatment.has_prr:
        k_m *= 1.0 - effect * (1.0 - cfg.prr_moisture_decay_factor)
        k_e *= 1.0 + effect * cfg.prr_kurtosis_shift
    if meta.treatment.has_salinity:
        ec_base += effect * cfg.salinity_ec_shift
        k_e *= 1.0 + effect * cfg.salinity_skew_shift
    k_m = k_m * np.exp(rng.normal(0, cfg.day_jitter, n_days))
    k_e = k_e * np.exp(rng.normal(0, cfg.day_jitter, n_days))
    day_amp = amp * (1 + rng.normal(0, 0.05, n_days))
    day_pulse = pulse * (1 + rng.normal(0, 0.05, n_days))

    # slots since the most recent watering (which may have been the previous day)
    s = (np.arange(SLOTS_PER_DAY) - WATERING_SLOT) % SLOTS_PER_DAY
    # the decay before today's watering continues yesterday's curve
    prev = np.concatenate([[0], np.arange(n_days - 1)])
    before = np.arange(SLOTS_PER_DAY) < WATERING_SLOT
    dk_m = np.where(before[None, :], k_m[prev][:, None], k_m[:, None])
    dk_e = np.where(before[None, :], k_e[prev][:, None], k_e[:, None])
    da = np.where(before[None, :], day_amp[prev][:, None], day_amp[:, None])
    dp = np.where(before[None, :], day_pulse[prev][:, None], day_pulse[:, None])
    db = np.where(before[None, :], ec_base[prev][:, None], ec_base[:, None])

    moisture = floor + da * np.exp(-dk_m * s / SLOTS_PER_DAY)
    ec = db + dp * np.exp(-dk_e * s / SLOTS_PER_DAY)
    clean = np.stack([moisture.ravel(), ec.ravel()], axis=1)
    noise = rng.normal(0, 1, clean.shape) * (cfg.noise_sigma * np.array([MOISTURE_SCALE, EC_SCALE]))
    noisy = clean + noise
    noisy[:, 0] = np.clip(noisy[:, 0], 0.0, 100.0)
    noisy[:, 1] = np.maximum(noisy[:, 1], 0.0)
    return noisy


def gen_soil(cfg: SynthConfig):
    """Soil readings for every plant on the half-hour grid.

    Returns ``(readings, metas)`` with readings sorted by (plant_id, timestamp).
    Slots are dropped independently with probability ``missing_rate``.
    """
    metas = plant_metas(cfg)
    origin = day_start(cfg.start_date)
    n_slots = cfg.n_days * SLOTS_PER_DAY
    times = origin + GRID_STEP * np.arange(n_slots)
    readings = []
    for meta in sorted(metas, key=lambda m: m.plant_id):
        rng = plant_rng(cfg.seed, meta.plant_id, 0)
        series = soil_profile(cfg, meta, rng)
        keep = rng.random(n_slots) >= cfg.missing_rate
        for t, (m, e) in zip(times[keep], series[keep]):
            readings.append(SoilReading(float(t), meta.plant_id, float(m), float(e)))
    return readings, metas


# -- spectra ------------------------------------------------------------------

SPECTRAL_GAIN_SIGMA = 0.25
SPECTRAL_BASELINE_SIGMA = 0.01
SPECTRAL_WHITE_SIGMA = 0.004
DEFAULT_SPECTRAL_AMPLITUDE = 0.002
DEFAULT_SIGNAL_CHANNELS = 120


def base_spectrum():
    """Smooth leaf-like reflectance curve on the 340-850 nm grid."""
    lam = WAVELENGTHS
    green = 0.06 * np.exp(-0.5 * ((lam - 550) / 35) ** 2)
    red_edge = 0.42 / (1 + np.exp(-(lam - 715) / 18))
    return 0.05 + green + red_edge


def signature_patterns(cfg: SynthConfig, n_signal_channels: int):
    """Zero-mean +/-1 patterns for salinity and PRR on the first channels.

    Signs alternate within neighbouring channel pairs, so each pattern is
    nearly orthogonal to smooth spectral variation.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0x5EC7])))
    pats = {}
    for name in ("salinity", "prr"):
        p = np.zeros(N_CHANNELS)
        signs = rng.choice([-1.0, 1.0], size=(n_signal_channels + 1) // 2)
        block = np.repeat(signs, 2)[:n_signal_channels]
        block[1::2] *= -1
        p[:n_signal_channels] = block
        pats[name] = p
    return pats


def session_dates(cfg: SynthConfig):
    out = []
    d = cfg.start_date
    while d < cfg.end_date:
        out.append(d)
        d += dt.timedelta(days=cfg.spectral_session_days)
    return out


def gen_spectral(cfg: SynthConfig, amplitude: float = DEFAULT_SPECTRAL_AMPLITUDE,
                 n_signal_channels: int = DEFAULT_SIGNAL_CHANNELS):
    """One reflectance spectrum per plant per session date.

    Noise per sample: a log-normal gain on the base curve, a random smooth
    baseline (three low cosines) and small white noise. Treatments add
    ``amplitude`` times their signature, scaled by rootstock attenuation.
    """
    if amplitude < 0:
        raise ConfigError("amplitude must be >= 0")
    if not 1 <= n_signal_channels <= N_CHANNELS:
        raise ConfigError(f"n_signal_channels must be in [1, {N_CHANNELS}]")
    base = base_spectrum()
    pats = signature_patterns(cfg, n_signal_channels)
    x = np.linspace(0, 1, N_CHANNELS)
    cosines = np.stack([np.cos(np.pi * j * x) for j in (1, 2, 3)])
    dates = session_dates(cfg)
    samples = []
    for meta in sorted(plant_metas(cfg), key=lambda m: m.plant_id):
        rng = plant_rng(cfg.seed, meta.plant_id, 1)
        att = cfg.rootstock_attenuation[meta.rootstock]
        sig = np.zeros(N_CHANNELS)
        if meta.treatment.has_salinity:
            sig += pats["salinity"]
        if meta.treatment.has_prr:
            sig += pats["prr"]
        sig *= amplitude * att
        for day in dates:
            gain = np.exp(rng.normal(0, SPECTRAL_GAIN_SIGMA))
            baseline = rng.normal(0, SPECTRAL_BASELINE_SIGMA, 3) @ cosines
            white = rng.normal(0, SPECTRAL_WHITE_SIGMA, N_CHANNELS)
            r = np.maximum(gain * base + baseline + sig + white, 0.0)
            samples.append(SpectralSample(meta.plant_id, day, 1, r))
    return samples
