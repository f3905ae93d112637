"""R-peak detection and R-peak based quality metrics for generated leads."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .errors import NoMatches, RateMismatch, SignalTooShort

LOWPASS_HZ = 15.0
HIGHPASS_HZ = 5.0
INTEGRATION_S = 0.150
REFRACTORY_S = 0.200
REFINE_S = 0.050
THRESHOLD_FRACTION = 0.5
# running mean of accepted integrated-peak heights, Pan-Tompkins style weighting
RUNNING_WEIGHT = 0.125
LEARNING_S = 2.0


@dataclass
class PeakSet:
    indices: np.ndarray
    amplitudes: np.ndarray
    fs: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.indices.shape != self.amplitudes.shape:
            raise ValueError("indices and amplitudes must align")
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("peak indices must be strictly increasing")

    def __len__(self):
        return self.indices.size


def _moving_average(x, width):
    return uniform_filter1d(x, size=max(int(width), 1), mode="nearest")


def qrs_energy(x, fs) -> np.ndarray:
    """Band-passed, differentiated, squared and integrated signal."""
    x = np.asarray(x, dtype=np.float64)
    low = _moving_average(x, round(fs / LOWPASS_HZ))
    band = low - _moving_average(low, round(fs / HIGHPASS_HZ))
    deriv = np.gradient(band)
    return _moving_average(deriv ** 2, round(INTEGRATION_S * fs))


def detect_rpeaks(x, fs: int) -> PeakSet:
    x = np.asarray(x, dtype=np.float64)
    if fs < 100:
        raise SignalTooShort(f"sampling rate {fs} Hz is below 100 Hz")
    if x.size < int(0.5 * fs):
        raise SignalTooShort(f"{x.size} samples is too short for detection at {fs} Hz")
    energy = qrs_energy(x, fs)
    scale = energy.max(initial=0.0)
    if scale <= 1e-12 * max(1.0, float(np.max(np.abs(x)) ** 2)) or scale == 0.0:
        return PeakSet(np.empty(0, int), np.empty(0), fs)

    candidates, _ = find_peaks(energy, distance=max(1, int(REFRACTORY_S * fs)))
    if candidates.size == 0:
        return PeakSet(np.empty(0, int), np.empty(0), fs)
    # seed the threshold from interior local maxima: the filter edges can carry
    # energy spikes no real QRS produces
    learn = candidates[candidates < int(LEARNING_S * fs)]
    running = float(energy[learn if learn.size else candidates].max())
    refractory = int(REFRACTORY_S * fs)
    half = int(round(REFINE_S * fs))
    accepted = []
    for c in candidates:
        height = energy[c]
        if height < THRESHOLD_FRACTION * running:
            continue
        lo, hi = max(0, c - half), min(x.size, c + half + 1)
        idx = lo + int(np.argmax(np.abs(x[lo:hi])))
        if accepted and idx - accepted[-1] < refractory:
            if abs(x[idx]) > abs(x[accepted[-1]]):
                accepted[-1] = idx
            continue
        accepted.append(idx)
        running = (1 - RUNNING_WEIGHT) * running + RUNNING_WEIGHT * height
    idx = np.asarray(sorted(set(accepted)), dtype=np.int64)
    return PeakSet(idx, x[idx], fs)


@dataclass
class PeakMatch:
    pairs: list  # (ref position in set, gen position in set)
    ref: PeakSet
    gen: PeakSet
    missed_ref: int
    spurious_gen: int

    @property
    def matched(self):
        return len(self.pairs)


def match_peaks(ref: PeakSet, gen: PeakSet, tolerance_ms: float = 100.0) -> PeakMatch:
    """Greedy nearest-neighbour pairing in ascending reference time."""
    if ref.fs != gen.fs:
        raise RateMismatch(f"reference at {ref.fs} Hz, generated at {gen.fs} Hz")
    tol = tolerance_ms * ref.fs / 1000.0
    used = np.zeros(len(gen), dtype=bool)
    pairs = []
    for i, r in enumerate(ref.indices):
        if len(gen) == 0:
            break
        dist = np.abs(gen.indices - r).astype(np.float64)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        if dist[j] <= tol:
            used[j] = True
            pairs.append((i, j))
    return PeakMatch(pairs, ref, gen, len(ref) - len(pairs), len(gen) - len(pairs))


def amplitude_gap_pct(match: PeakMatch) -> tuple[float, int]:
    """Mean |a_gen - a_ref| / |a_ref| in percent, and the count of skipped zero-amplitude pairs."""
    gaps = []
    skipped = 0
    for i, j in match.pairs:
        a_ref = match.ref.amplitudes[i]
        if a_ref == 0:
            skipped += 1
            continue
        gaps.append(abs(match.gen.amplitudes[j] - a_ref) / abs(a_ref))
    if not gaps:
        raise NoMatches("no matched peaks with non-zero reference amplitude")
    return 100.0 * float(np.mean(gaps)), skipped


def position_error_ms(match: PeakMatch, fs: int | None = None) -> float:
    if not match.pairs:
        raise NoMatches("no matched peaks")
    fs = fs or match.ref.fs
    d = [abs(int(match.gen.indices[j]) - int(match.ref.indices[i])) for i, j in match.pairs]
    return float(np.mean(d)) / fs * 1000.0


def _finite_or_none(v):
    return None if isinstance(v, float) and not np.isfinite(v) else v


@dataclass
class QualityReport:
    amplitude_gap_pct: float
    position_error_ms: float
    matched: int
    missed_ref: int
    spurious_gen: int
    zero_amplitude_skipped: int = 0
    per_lead: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # means over zero matched peaks are undefined; JSON has no NaN, so they become null
        return {"amp_pct": _finite_or_none(self.amplitude_gap_pct),
                "pos_ms": _finite_or_none(self.position_error_ms),
                "matched": self.matched, "missed_ref": self.missed_ref,
                "spurious_gen": self.spurious_gen,
                "zero_amplitude_skipped": self.zero_amplitude_skipped,
                "per_lead": {lead: {k: _finite_or_none(v) for k, v in row.items()}
                             for lead, row in self.per_lead.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False)


def _pooled(matches):
    amp_terms, pos_terms, skipped = [], [], 0
    for m in matches:
        for i, j in m.pairs:
            a_ref = m.ref.amplitudes[i]
            pos_terms.append(abs(int(m.gen.indices[j]) - int(m.ref.indices[i])) / m.ref.fs * 1000)
            if a_ref == 0:
                skipped += 1
            else:
                amp_terms.append(abs(m.gen.amplitudes[j] - a_ref) / abs(a_ref) * 100)
    amp = float(np.mean(amp_terms)) if amp_terms else float("nan")
    pos = float(np.mean(pos_terms)) if pos_terms else float("nan")
    return amp, pos, skipped


def assess(pairs_by_lead: dict, tolerance_ms: float = 100.0) -> QualityReport:
    """Pool peak-level errors over every (reference, generated) signal pair.

    ``pairs_by_lead`` maps a lead name to a list of (ref_signal, gen_signal, fs).
    Means are taken over matched peaks pooled across records.
    """
    per_lead = {}
    all_matches = []
    for lead, signals in pairs_by_lead.items():
        matches = [match_peaks(detect_rpeaks(r, fs), detect_rpeaks(g, fs), tolerance_ms)
                   for r, g, fs in signals]
        all_matches.extend(matches)
        amp, pos, skipped = _pooled(matches)
        per_lead[lead] = {"amp_pct": amp, "pos_ms": pos,
                          "matched": sum(m.matched for m in matches),
                          "missed_ref": sum(m.missed_ref for m in matches),
                          "spurious_gen": sum(m.spurious_gen for m in matches),
                          "zero_amplitude_skipped": skipped}
    amp, pos, skipped = _pooled(all_matches)
    return QualityReport(amp, pos, sum(m.matched for m in all_matches),
                         sum(m.missed_ref for m in all_matches),
                         sum(m.spurious_gen for m in all_matches), skipped, per_lead)
