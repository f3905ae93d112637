"""Synthetic 12-lead ECG generator.

Each heartbeat is a sum of five Gaussian bumps (P, Q, R, S, T). Leads I, II
and the precordial leads scale the bumps with their own gains; the remaining
limb leads are derived from I and II so the Einthoven/Goldberger identities
hold exactly on clean records.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DurationTooShort, InvalidRate
from .signal_core import WINDOW_LEN, EcgRecord, LeadId, derive_limb_leads

WAVES = ("P", "Q", "R", "S", "T")

# lead II reference morphology: amplitude (mV), centre relative to R (s), width (s)
DEFAULT_WAVES = {
    "P": (0.15, -0.20, 0.030),
    "Q": (-0.10, -0.04, 0.010),
    "R": (1.00, 0.00, 0.012),
    "S": (-0.20, 0.04, 0.012),
    "T": (0.30, 0.25, 0.050),
}

# per-wave gains (P, Q, R, S, T) applied to the lead II reference
DEFAULT_GAINS = {
    LeadId.I: (0.5, 0.5, 0.6, 0.4, 0.7),
    LeadId.II: (1.0, 1.0, 1.0, 1.0, 1.0),
    LeadId.V1: (0.5, 0.0, 0.3, 4.0, 0.3),
    LeadId.V2: (0.6, 0.0, 0.6, 5.0, 2.0),
    LeadId.V3: (0.6, 0.2, 1.0, 3.5, 2.0),
    LeadId.V4: (0.6, 0.5, 1.5, 2.0, 1.8),
    LeadId.V5: (0.6, 0.8, 1.4, 1.0, 1.4),
    LeadId.V6: (0.6, 0.8, 1.1, 0.5, 1.0),
}

PROJECTED_LEADS = (LeadId.I, LeadId.II, LeadId.V1, LeadId.V2, LeadId.V3,
                   LeadId.V4, LeadId.V5, LeadId.V6)

MI_ST_OFFSET = 0.15
MI_ST_CENTER = 0.15
MI_ST_WIDTH = 0.05
MI_Q_FACTOR = 3.0
AF_RR_SPREAD = 0.3


@dataclass(frozen=True)
class BeatTemplate:
    waves: dict = field(default_factory=lambda: dict(DEFAULT_WAVES))
    gains: dict = field(default_factory=lambda: dict(DEFAULT_GAINS))

    def __post_init__(self):
        for name in WAVES:
            if name not in self.waves:
                raise ValueError(f"template is missing wave {name}")
            if self.waves[name][2] <= 0:
                raise ValueError(f"wave {name} must have positive width")
        for lead in PROJECTED_LEADS:
            if len(self.gains.get(lead, ())) != len(WAVES):
                raise ValueError(f"template needs five gains for lead {lead.name}")

    def amplitude(self, lead: LeadId, wave: str) -> float:
        return self.waves[wave][0] * self.gains[lead][WAVES.index(wave)]

    def jittered(self, rng: np.random.Generator, spread: float = 0.15) -> "BeatTemplate":
        """Per-record variation: every lead/wave gain scaled by U(1-spread, 1+spread)."""
        gains = {}
        for lead in PROJECTED_LEADS:
            scale = rng.uniform(1 - spread, 1 + spread, size=len(WAVES))
            gains[lead] = tuple(float(g * s) for g, s in zip(self.gains[lead], scale))
        return replace(self, gains=gains)


@dataclass(frozen=True)
class ArtifactConfig:
    baseline_wander_amp: float = 0.0
    baseline_wander_freq: float = 0.3
    powerline_amp: float = 0.0
    powerline_freq: float = 50.0
    white_noise_std: float = 0.0

    def __post_init__(self):
        for name in ("baseline_wander_amp", "powerline_amp", "white_noise_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.baseline_wander_amp > 0 and self.baseline_wander_freq <= 0:
            raise ValueError("baseline_wander_freq must be > 0")
        if self.powerline_amp > 0 and self.powerline_freq <= 0:
            raise ValueError("powerline_freq must be > 0")


def beat_times(condition: str, heart_rate: float, duration: float, seed: int) -> np.ndarray:
    """R-peak times in seconds. AF beats get i.i.d. RR in [0.7, 1.3] x the mean RR."""
    if not 30 <= heart_rate <= 220:
        raise InvalidRate(f"heart rate {heart_rate} bpm outside [30, 220]")
    rr = 60.0 / heart_rate
    times = []
    t = rr / 2
    rng = np.random.default_rng(seed)
    while t < duration:
        times.append(t)
        if condition == "af":
            t += rng.uniform((1 - AF_RR_SPREAD) * rr, (1 + AF_RR_SPREAD) * rr)
        else:
            t += rr
    return np.asarray(times)


def _bump(t, center, width):
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def _lead_wave_amplitude(template, lead, wave, condition):
    amp = template.amplitude(lead, wave)
    if condition == "af" and wave == "P":
        return 0.0
    if condition == "mi":
        if wave == "Q":
            amp *= MI_Q_FACTOR
        if wave == "T" and lead == LeadId.II:
            amp = -amp
    return amp


def generate_record(template: BeatTemplate | None = None, condition: str = "normal",
                    heart_rate: float = 60.0, duration: float = 10.0, fs: int = 500,
                    seed: int = 0, window_len: int = WINDOW_LEN,
                    record_id: str = "") -> EcgRecord:
    template = template or BeatTemplate()
    if condition not in ("normal", "mi", "af"):
        raise ValueError(f"unknown condition {condition!r}")
    if duration * fs < window_len:
        raise DurationTooShort(f"{duration} s at {fs} Hz is shorter than {window_len} samples")
    beats = beat_times(condition, heart_rate, duration, seed)
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    leads = {}
    for lead in PROJECTED_LEADS:
        x = np.zeros(n)
        for wave in WAVES:
            amp = _lead_wave_amplitude(template, lead, wave, condition)
            if amp == 0.0:
                continue
            _, center, width = template.waves[wave]
            for tb in beats:
                x += amp * _bump(t, tb + center, width)
        if condition == "mi" and lead in (LeadId.V2, LeadId.V3):
            for tb in beats:
                x += MI_ST_OFFSET * _bump(t, tb + MI_ST_CENTER, MI_ST_WIDTH)
        leads[lead] = x
    leads.update(derive_limb_leads(leads[LeadId.I], leads[LeadId.II]))
    return EcgRecord(fs, leads, label=condition, record_id=record_id)


def inject_artifacts(record: EcgRecord, cfg: ArtifactConfig, seed: int = 0) -> EcgRecord:
    """Add baseline wander, powerline hum and white noise to every lead."""
    rng = np.random.default_rng(seed)
    t = np.arange(record.n_samples) / record.sampling_rate
    out = {}
    for lead in sorted(record.leads):
        phase_bw, phase_pl = rng.uniform(0, 2 * np.pi, size=2)
        x = record.leads[lead].copy()
        if cfg.baseline_wander_amp > 0:
            x += cfg.baseline_wander_amp * np.sin(2 * np.pi * cfg.baseline_wander_freq * t + phase_bw)
        if cfg.powerline_amp > 0:
            x += cfg.powerline_amp * np.sin(2 * np.pi * cfg.powerline_freq * t + phase_pl)
        if cfg.white_noise_std > 0:
            x += rng.normal(0.0, cfg.white_noise_std, size=x.size)
        out[lead] = x
    return EcgRecord(record.sampling_rate, out, label=record.label, record_id=record.record_id)


def make_corpus(n_normal: int, n_mi: int = 0, n_af: int = 0, fs: int = 500,
                duration: float = 10.0, seed: int = 0,
                artifacts: ArtifactConfig | None = None,
                hr_range: tuple[float, float] = (50.0, 100.0)) -> list[EcgRecord]:
    """Labelled corpus with per-record heart rate and morphology jitter."""
    base = BeatTemplate()
    children = np.random.SeedSequence(seed).spawn(n_normal + n_mi + n_af)
    labels = ["normal"] * n_normal + ["mi"] * n_mi + ["af"] * n_af
    records = []
    for k, (label, child) in enumerate(zip(labels, children)):
        rng = np.random.default_rng(child)
        hr = float(rng.uniform(*hr_range))
        beat_seed, art_seed = (int(s) for s in rng.integers(0, 2**31 - 1, size=2))
        rec = generate_record(base.jittered(rng), label, hr, duration, fs, beat_seed,
                              record_id=f"{label}_{k:05d}")
        if artifacts is not None:
            rec = inject_artifacts(rec, artifacts, art_seed)
        records.append(rec)
    return records
