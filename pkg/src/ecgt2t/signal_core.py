"""Lead identities, the record container and window extraction."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, MissingLead, OutOfBounds

WINDOW_LEN = 2048
DEFAULT_DELAY = 0.5
DEFAULT_FS = 500

LABELS = ("normal", "mi", "af")


class LeadId(enum.IntEnum):
    I = 0
    II = 1
    III = 2
    aVR = 3
    aVL = 4
    aVF = 5
    V1 = 6
    V2 = 7
    V3 = 8
    V4 = 9
    V5 = 10
    V6 = 11

    @classmethod
    def parse(cls, name: str) -> "LeadId":
        for lead in cls:
            if lead.name.lower() == name.strip().lower():
                return lead
        raise MissingLead(f"unknown lead name {name!r}")


ALL_LEADS = tuple(LeadId)
T2T_GENERATED = tuple(LeadId)[2:]
S2E_GENERATED = tuple(LeadId)[1:]


def generated_set(mode: str) -> tuple[LeadId, ...]:
    if mode == "t2t":
        return T2T_GENERATED
    if mode == "s2e":
        return S2E_GENERATED
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class EcgRecord:
    """A multi-lead recording. Samples are millivolts."""

    sampling_rate: int
    leads: dict[LeadId, np.ndarray]
    label: str = "normal"
    record_id: str = ""

    def __post_init__(self):
        if int(self.sampling_rate) != self.sampling_rate or self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be a positive integer")
        self.sampling_rate = int(self.sampling_rate)
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if not self.leads:
            raise ValueError("record has no leads")
        fixed = {}
        n = None
        for lead in sorted(self.leads):
            arr = np.asarray(self.leads[lead], dtype=np.float64)
            if arr.ndim != 1 or arr.size < 1:
                raise LengthMismatch("lead arrays must be 1-D and non-empty")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise LengthMismatch(f"lead {LeadId(lead).name} has {arr.size} samples, expected {n}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"lead {LeadId(lead).name} contains non-finite samples")
            fixed[LeadId(lead)] = arr
        self.leads = fixed

    @property
    def n_samples(self) -> int:
        return next(iter(self.leads.values())).size

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate

    def lead(self, lead: LeadId) -> np.ndarray:
        try:
            return self.leads[lead]
        except KeyError:
            raise MissingLead(f"record {self.record_id!r} has no lead {LeadId(lead).name}") from None

    def as_array(self, leads=ALL_LEADS) -> np.ndarray:
        return np.stack([self.lead(lead) for lead in leads])


@dataclass(frozen=True)
class AsyncLeadPair:
    lead_i: np.ndarray
    lead_ii: np.ndarray
    window_len: int
    delay: float
    t0: float
    fs: int = DEFAULT_FS
    # (mean, std) of each raw window, kept so generated output can be mapped back to mV
    stats_i: tuple[float, float] = field(default=(0.0, 1.0))
    stats_ii: tuple[float, float] = field(default=(0.0, 1.0))


def _start_index(seconds: float, fs: int) -> int:
    return int(round(seconds * fs))


def extract_async_pair(record: EcgRecord, t0: float = 0.0, delay: float = DEFAULT_DELAY,
                       window_len: int = WINDOW_LEN) -> AsyncLeadPair:
    """Cut a Lead I window at ``t0`` and a Lead II window ``delay`` seconds later."""
    lead_i = record.lead(LeadId.I)
    lead_ii = record.lead(LeadId.II)
    if t0 < 0 or delay < 0:
        raise OutOfBounds("t0 and delay must be non-negative")
    fs = record.sampling_rate
    a = _start_index(t0, fs)
    b = _start_index(t0 + delay, fs)
    if b + window_len > record.n_samples or a + window_len > record.n_samples:
        raise OutOfBounds(
            f"window [{b}, {b + window_len}) exceeds record of {record.n_samples} samples")
    wi = lead_i[a:a + window_len].copy()
    wii = lead_ii[b:b + window_len].copy()
    return AsyncLeadPair(wi, wii, window_len, delay, t0, fs,
                         stats_i=window_stats(wi), stats_ii=window_stats(wii))


def derive_limb_leads(lead_i, lead_ii) -> dict[LeadId, np.ndarray]:
    """Einthoven and Goldberger relations for synchronous Lead I / Lead II."""
    lead_i = np.asarray(lead_i, dtype=np.float64)
    lead_ii = np.asarray(lead_ii, dtype=np.float64)
    if lead_i.shape != lead_ii.shape:
        raise LengthMismatch(f"lead I has shape {lead_i.shape}, lead II {lead_ii.shape}")
    return {
        LeadId.III: lead_ii - lead_i,
        LeadId.aVR: -(lead_i + lead_ii) / 2,
        LeadId.aVL: lead_i - lead_ii / 2,
        LeadId.aVF: lead_ii - lead_i / 2,
    }


DEGENERATE_STD = 1e-8


def window_stats(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    return float(x.mean()), float(x.std())


def normalize_window(x) -> np.ndarray:
    """Z-score a window; windows flatter than 1e-8 map to zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError("normalize_window needs at least 2 samples")
    mean, std = x.mean(), x.std()
    if std < DEGENERATE_STD:
        return np.zeros_like(x)
    return (x - mean) / std


def denormalize_window(x, stats: tuple[float, float]) -> np.ndarray:
    mean, std = stats
    if std < DEGENERATE_STD:
        return np.full_like(np.asarray(x, dtype=np.float64), mean)
    return np.asarray(x, dtype=np.float64) * std + mean
