"""Command-line pipelines: gen-data, train-gan, synth, assess, classify, plot.

Exit codes: 0 success, 2 bad flags or config, 3 I/O or file format,
4 non-finite loss, 5 mode mismatch, 6 missing lead, 7 missing checkpoint.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import classifier as clf
from .dataset_io import DatasetManifest, load_record, save_record, stratified_split, write_corpus
from .errors import (EcgError, FormatError, MissingCheckpoint, MissingLead, ModeMismatch, NonFiniteLoss,
                     OutOfBounds, UntrainedModel, WindowTooLong)
from .model import (NetworkBundle, TrainConfig, load_for_inference, save_history,
                    synthesize_from_one, synthesize_twelve, train)
from .plotting import plot_overlay
from .quality import assess
from .signal_core import LeadId, extract_async_pair
from .synth_data import ArtifactConfig, make_corpus

log = logging.getLogger("ecgt2t")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """JSON run configuration; sections mirror TrainConfig, ClassifierConfig, ArtifactConfig."""

    train: dict = field(default_factory=dict)
    classifier: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _seeded(section: dict, seed, what: str) -> dict:
    section = dict(section)
    if seed is not None:
        section["seed"] = seed
    if "seed" not in section:
        raise UsageError(f"{what} needs an explicit seed (--seed or config)")
    return section


def cmd_gen_data(args):
    art = None
    if args.artifacts:
        raw = json.loads(Path(args.artifacts).read_text())
        if "artifacts" in raw and isinstance(raw["artifacts"], dict):
            raw = raw["artifacts"]
        try:
            art = ArtifactConfig(**raw)
        except TypeError as exc:
            raise UsageError(f"bad artifact config: {exc}") from None
    records = make_corpus(args.n_normal, args.n_mi, args.n_af, fs=args.fs,
                          duration=args.duration, seed=args.seed, artifacts=art)
    out = Path(args.out)
    manifest = write_corpus(records, out)
    manifest = stratified_split(manifest, (7, 1, 2), seed=args.seed)
    manifest.save(out / "manifest.json")
    print(f"wrote {len(records)} records to {out}")


def _manifest(data_dir) -> DatasetManifest:
    return DatasetManifest.load_file(Path(data_dir) / "manifest.json")


def cmd_train_gan(args):
    run = RunConfig.load(args.config) if args.config else RunConfig()
    section = _seeded(run.train, args.seed, "train-gan")
    section["mode"] = args.mode
    if args.steps is not None:
        section["steps"] = args.steps
    try:
        cfg = TrainConfig.from_dict(section)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    resume = None
    if args.resume:
        resume = NetworkBundle.load(args.resume)
        if resume.mode != cfg.mode:
            raise ModeMismatch(f"resume checkpoint is {resume.mode}, requested {cfg.mode}")
        resume.cfg = cfg
    manifest = _manifest(args.data)

    def progress(row, val):
        log.info("step %d d=%.4f rec=%.4f val_total=%.4f", row["step"], row["d_loss"],
                 row["l_rec"], val["total"])

    result = train(manifest, cfg, resume=resume, progress=progress)
    out = Path(args.out)
    result.bundle.save(out, weights=result.best_weights, extra_meta={"best_step": result.best_step})
    result.bundle.save(str(out) + ".last")
    save_history(result, str(out) + ".history.json")
    print(f"checkpoint {out} (best step {result.best_step}, {len(result.history)} steps)")


def cmd_synth(args):
    nets = load_for_inference(args.ckpt)
    if args.mode and args.mode != nets.mode:
        raise ModeMismatch(f"checkpoint is {nets.mode}, --mode asked for {args.mode}")
    rec = load_record(args.record)
    pair = extract_async_pair(rec, args.t0, args.delay, nets.cfg.window_len)
    if nets.mode == "t2t":
        out = synthesize_twelve(pair, nets, record_id=rec.record_id, label=rec.label)
    else:
        out = synthesize_from_one(pair.lead_i, nets, fs=rec.sampling_rate,
                                  record_id=rec.record_id, label=rec.label)
    save_record(out, args.out)
    print(f"wrote {args.out} ({nets.mode})")


def cmd_assess(args):
    ref = load_record(args.ref)
    gen = load_record(args.gen)
    leads = [LeadId.parse(name) for name in args.leads.split(",") if name.strip()]
    start = int(round(args.t0 * ref.sampling_rate))
    pairs = {}
    for lead in leads:
        r = ref.lead(lead)
        g = gen.lead(lead)
        r = r[start:start + g.size]
        if r.size != g.size:
            raise OutOfBounds(f"reference is too short to align with the generated {lead.name}")
        pairs[lead.name] = [(r, g, ref.sampling_rate)]
    report = assess(pairs, args.tolerance)
    Path(args.out).write_text(report.to_json() + "\n")
    print(report.to_json())


def cmd_classify(args):
    run = RunConfig.load(args.config) if args.config else RunConfig()
    section = _seeded(run.classifier, args.seed, "classify")
    if args.epochs is not None:
        section["epochs"] = args.epochs
    try:
        cfg = clf.ClassifierConfig.from_dict(section)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    variant = clf.LeadVariant(args.variant)
    gan = None
    if variant in (clf.LeadVariant.T2T, clf.LeadVariant.S2E):
        if not args.ckpt:
            raise MissingCheckpoint(f"variant {variant.value} needs --ckpt")
        gan = load_for_inference(args.ckpt)
    manifest = _manifest(args.data)
    keep = {"normal", args.task}
    splits = {}
    for split in ("train", "val", "test"):
        recs = [r for r in manifest.load(split) if r.label in keep]
        splits[split] = clf.build_variant_dataset(recs, variant, gan, positive=args.task)
    result = clf.train_classifier(splits["train"], cfg, splits["val"] if splits["val"].y.size else None)
    report = clf.evaluate_classifier(result.model, splits["test"], args.task, args.n_boot, cfg.seed)
    Path(args.out).write_text(report.to_json() + "\n")
    print(report.to_json())


def _seconds(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("ms"):
        return float(text[:-2]) / 1000
    return float(text.rstrip("s"))


def cmd_plot(args):
    ref = load_record(args.ref)
    t2t = load_record(args.t2t) if args.t2t else None
    s2e = load_record(args.s2e) if args.s2e else None
    svg = plot_overlay(ref, t2t, s2e, window_s=_seconds(args.window), ref_offset_s=args.t0)
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecgt2t", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic labelled corpus with a 7:1:2 split")
    g.add_argument("--out", required=True)
    g.add_argument("--n-normal", type=int, required=True)
    g.add_argument("--n-mi", type=int, default=0)
    g.add_argument("--n-af", type=int, default=0)
    g.add_argument("--fs", type=int, default=500)
    g.add_argument("--duration", type=float, default=10.0)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--artifacts")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train-gan", help="train a t2t or s2e generator")
    t.add_argument("--data", required=True)
    t.add_argument("--mode", choices=("t2t", "s2e"), required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--resume")
    t.set_defaults(func=cmd_train_gan)

    s = sub.add_parser("synth", help="synthesize a 12-lead record from one source record")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--record", required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--delay", type=float, default=0.5)
    s.add_argument("--mode", choices=("t2t", "s2e"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("assess", help="R-peak amplitude/position errors of generated leads")
    a.add_argument("--ref", required=True)
    a.add_argument("--gen", required=True)
    a.add_argument("--leads", default="V1,V5")
    a.add_argument("--t0", type=float, default=0.0,
                   help="offset (s) into the reference where the generated window starts")
    a.add_argument("--tolerance", type=float, default=100.0, help="matching tolerance (ms)")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_assess)

    c = sub.add_parser("classify", help="train and test a classifier on one lead variant")
    c.add_argument("--data", required=True)
    c.add_argument("--variant", choices=[v.value for v in clf.LeadVariant], required=True)
    c.add_argument("--ckpt")
    c.add_argument("--task", choices=("mi", "af"), required=True)
    c.add_argument("--config")
    c.add_argument("--seed", type=int)
    c.add_argument("--epochs", type=int)
    c.add_argument("--n-boot", type=int, default=1000)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_classify)

    pl = sub.add_parser("plot", help="12-panel SVG overlay")
    pl.add_argument("--ref", required=True)
    pl.add_argument("--t2t")
    pl.add_argument("--s2e")
    pl.add_argument("--window", default="2s")
    pl.add_argument("--t0", type=float, default=0.0)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


EXIT_CODES = [
    (UsageError, 2),
    (NonFiniteLoss, 4),
    (ModeMismatch, 5),
    (MissingLead, 6),
    (MissingCheckpoint, 7),
    (UntrainedModel, 7),
    (FormatError, 3),
    (OSError, 3),
    (OutOfBounds, 2),
    (WindowTooLong, 2),
    (ValueError, 2),
    (EcgError, 2),  # remaining input problems: empty splits, too few samples per class
]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
