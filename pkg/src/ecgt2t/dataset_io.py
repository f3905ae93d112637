"""Record files, CSV import, manifests and stratified splits.

Binary record layout (little-endian)::

    b"ECGR1\\0"          6 bytes magic
    u32 fs
    u8  label code      0 normal, 1 mi, 2 af
    u8  lead_count
    u32 samples_per_lead
    f32[lead_count * samples_per_lead]   leads in LeadId order

Only a prefix of the LeadId order can be stored (I; I+II; ...; all 12), since
the header does not carry lead identities.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ClassTooSmall, FormatError
from .signal_core import LABELS, EcgRecord, LeadId

MAGIC = b"ECGR1\x00"
_HEADER = struct.Struct("<6sIBBI")
HEADER_SIZE = _HEADER.size
LABEL_CODES = {name: code for code, name in enumerate(LABELS)}
SPLITS = ("train", "val", "test")


def record_to_bytes(record: EcgRecord) -> bytes:
    present = sorted(record.leads)
    if present != list(LeadId)[:len(present)]:
        names = ",".join(LeadId(p).name for p in present)
        raise FormatError(f"leads {names} are not a prefix of the standard lead order")
    header = _HEADER.pack(MAGIC, record.sampling_rate, LABEL_CODES[record.label],
                          len(present), record.n_samples)
    payload = np.stack([record.leads[lead] for lead in present]).astype("<f4")
    return header + payload.tobytes()


def record_from_bytes(data: bytes, record_id: str = "") -> EcgRecord:
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header")
    magic, fs, code, n_leads, n_samples = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if code >= len(LABELS):
        raise FormatError(f"unknown label code {code}")
    if not 1 <= n_leads <= len(LeadId) or n_samples < 1 or fs < 1:
        raise FormatError("invalid header fields")
    expected = HEADER_SIZE + 4 * n_leads * n_samples
    if len(data) != expected:
        raise FormatError(f"payload is {len(data) - HEADER_SIZE} bytes, header implies "
                          f"{expected - HEADER_SIZE}")
    payload = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).reshape(n_leads, n_samples)
    leads = {LeadId(k): payload[k].astype(np.float64) for k in range(n_leads)}
    return EcgRecord(fs, leads, label=LABELS[code], record_id=record_id)


def save_record(record: EcgRecord, path) -> None:
    Path(path).write_bytes(record_to_bytes(record))


def load_record(path) -> EcgRecord:
    path = Path(path)
    return record_from_bytes(path.read_bytes(), record_id=path.stem)


def load_csv_record(path) -> EcgRecord:
    """CSV with a ``fs=<Hz>,label=<tag>`` line, a header of lead names, one column per lead."""
    path = Path(path)
    with path.open(newline="") as fh:
        meta_line = fh.readline().strip()
        meta = {}
        for item in meta_line.split(","):
            if "=" not in item:
                raise FormatError(f"bad metadata line {meta_line!r}")
            key, value = item.split("=", 1)
            meta[key.strip()] = value.strip()
        if "fs" not in meta:
            raise FormatError("metadata line must define fs")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("missing lead header row") from None
        leads = [LeadId.parse(name) for name in header]
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise FormatError("no samples")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] != len(leads):
        raise FormatError("row width does not match header")
    return EcgRecord(int(float(meta["fs"])), {lead: data[:, k] for k, lead in enumerate(leads)},
                     label=meta.get("label", "normal"), record_id=path.stem)


@dataclass
class ManifestEntry:
    record_id: str
    path: str
    label: str
    split: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    fs: int | None = None
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        ids = [e.record_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest record ids must be unique")

    @property
    def split_assignment(self) -> dict[str, str]:
        return {e.record_id: e.split for e in self.entries if e.split is not None}

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def select(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def load(self, split: str | None = None) -> list[EcgRecord]:
        entries = self.entries if split is None else self.select(split)
        out = []
        for e in entries:
            rec = load_record(self.resolve(e))
            rec.record_id = e.record_id
            out.append(rec)
        return out

    def to_json(self) -> str:
        rows = []
        for e in self.entries:
            row = {"id": e.record_id, "path": e.path, "label": e.label}
            if e.split is not None:
                row["split"] = e.split
            rows.append(row)
        return json.dumps(rows, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load_file(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            rows = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest {path} is not valid JSON: {exc}") from None
        entries = [ManifestEntry(r["id"], r["path"], r["label"], r.get("split")) for r in rows]
        return cls(entries, root=path.parent)


def write_corpus(records, out_dir, manifest_name="manifest.json") -> DatasetManifest:
    out_dir = Path(out_dir)
    os.makedirs(out_dir / "records", exist_ok=True)
    entries = []
    for rec in records:
        rel = f"records/{rec.record_id}.ecgr"
        save_record(rec, out_dir / rel)
        entries.append(ManifestEntry(rec.record_id, rel, rec.label))
    fs = records[0].sampling_rate if records else None
    return DatasetManifest(entries, fs=fs, root=out_dir)


def apportion(n: int, ratios) -> list[int]:
    """Floor of each share, then leftover records one at a time in split order."""
    total = sum(ratios)
    counts = [n * r // total for r in ratios]
    k = 0
    while sum(counts) < n:
        if ratios[k % len(ratios)] > 0:
            counts[k % len(ratios)] += 1
        k += 1
    return counts


def stratified_split(manifest: DatasetManifest, ratios=(7, 1, 2), seed: int = 0,
                     min_per_class: int = 10) -> DatasetManifest:
    ratios = tuple(int(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) == 0:
        raise ValueError("ratios must be three non-negative integers, not all zero")
    by_label: dict[str, list[int]] = {}
    for idx, e in enumerate(manifest.entries):
        by_label.setdefault(e.label, []).append(idx)
    rng = np.random.default_rng(seed)
    assignment = {}
    for label in sorted(by_label):
        members = by_label[label]
        if len(members) < min_per_class:
            raise ClassTooSmall(f"class {label!r} has {len(members)} records, need {min_per_class}")
        order = [members[i] for i in rng.permutation(len(members))]
        start = 0
        for split, count in zip(SPLITS, apportion(len(members), ratios)):
            for idx in order[start:start + count]:
                assignment[idx] = split
            start += count
    entries = [replace(e, split=assignment[i]) for i, e in enumerate(manifest.entries)]
    return DatasetManifest(entries, fs=manifest.fs, root=manifest.root)
