"""Lead-variant datasets, a 1-D ResNet18 classifier and AUROC/AUPRC with bootstrap CIs."""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Mapping, Sequence

import numpy as np
import torch
from scipy.stats import rankdata
from torch import nn
import torch.nn.functional as F

from .errors import (DegenerateResampling, MissingCheckpoint, ModeMismatch, NonFiniteLoss,
                     SingleClass, SingleClassDataset)
from .model import NetworkBundle, synthesize_from_one, synthesize_twelve
from .nn_substrate import Adam, focal_loss, he_init_
from .signal_core import (DEFAULT_DELAY, WINDOW_LEN, ALL_LEADS, EcgRecord,
                          extract_async_pair)


class LeadVariant(enum.Enum):
    ORIGINAL = "original"
    T2T = "t2t"
    S2E = "s2e"
    TWO = "two"
    SINGLE = "single"

    @property
    def channels(self) -> int:
        return {"original": 12, "t2t": 12, "s2e": 12, "two": 2, "single": 1}[self.value]


@dataclass
class VariantDataset:
    x: np.ndarray  # (N, C, L) millivolts
    y: np.ndarray  # (N,) 0/1
    record_ids: list
    variant: LeadVariant


def build_variant_dataset(records: Sequence[EcgRecord], variant: LeadVariant,
                          gan: NetworkBundle | None = None, positive: str = "mi",
                          t0: float = 0.0, delay: float = DEFAULT_DELAY,
                          window_len: int = WINDOW_LEN) -> VariantDataset:
    """Channel stacks in LeadId order; label 1 where ``record.label == positive``.

    Original holds the synchronous 12 leads at ``t0``. Two/T2T hold Lead I at
    ``t0`` and Lead II ``delay`` seconds later. Generated channels come from
    the matching checkpoint.
    """
    variant = LeadVariant(variant)
    if variant in (LeadVariant.T2T, LeadVariant.S2E):
        if gan is None:
            raise MissingCheckpoint(f"variant {variant.value} needs a {variant.value} checkpoint")
        if gan.mode != variant.value:
            raise ModeMismatch(f"variant {variant.value} got a {gan.mode} checkpoint")
    xs = []
    for rec in records:
        pair = extract_async_pair(rec, t0, delay, window_len)
        if variant is LeadVariant.ORIGINAL:
            a = int(round(t0 * rec.sampling_rate))
            x = rec.as_array(ALL_LEADS)[:, a:a + window_len]
        elif variant is LeadVariant.TWO:
            x = np.stack([pair.lead_i, pair.lead_ii])
        elif variant is LeadVariant.SINGLE:
            x = pair.lead_i[None, :]
        elif variant is LeadVariant.T2T:
            x = synthesize_twelve(pair, gan).as_array(ALL_LEADS)
        else:
            x = synthesize_from_one(pair.lead_i, gan, fs=rec.sampling_rate).as_array(ALL_LEADS)
        xs.append(x)
    y = np.array([1 if r.label == positive else 0 for r in records], dtype=np.int64)
    return VariantDataset(np.stack(xs), y, [r.record_id for r in records], variant)


# -- network -------------------------------------------------------------------

class BasicBlock(nn.Module):
    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv1 = nn.Conv1d(in_ch, out_ch, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm1d(out_ch)
        self.conv2 = nn.Conv1d(out_ch, out_ch, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm1d(out_ch)
        self.down = None
        if stride != 1 or in_ch != out_ch:
            self.down = nn.Sequential(nn.Conv1d(in_ch, out_ch, 1, stride, bias=False),
                                      nn.BatchNorm1d(out_ch))

    def forward(self, x):
        identity = x if self.down is None else self.down(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class ResNet1d18(nn.Module):
    """Stride-2 stem, four stages of two basic blocks, global pooling, one linear layer."""

    def __init__(self, in_channels, n_classes=2, width=32, layers=(2, 2, 2, 2)):
        super().__init__()
        self.stem = nn.Sequential(nn.Conv1d(in_channels, width, 7, 2, 3, bias=False),
                                  nn.BatchNorm1d(width), nn.ReLU())
        blocks = []
        c = width
        for k, n in enumerate(layers):
            out = width * 2 ** k
            for b in range(n):
                blocks.append(BasicBlock(c, out, stride=2 if (b == 0 and k > 0) else 1))
                c = out
        self.stages = nn.Sequential(*blocks)
        self.fc = nn.Linear(c, n_classes)

    def forward(self, x):
        h = self.stages(self.stem(x))
        return self.fc(h.mean(dim=2))


def prepare_inputs(x: np.ndarray) -> torch.Tensor:
    """Per-record, per-channel z-score; flat channels become zeros."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    z = np.where(std < 1e-8, 0.0, (x - mean) / np.where(std < 1e-8, 1.0, std))
    return torch.from_numpy(z.astype(np.float32))


@dataclass
class ClassifierConfig:
    lr: float = 1e-4
    weight_decay: float = 1e-5
    alpha: float = 0.5
    gamma: float = 2.0
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    width: int = 32

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("invalid classifier configuration")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ClassifierConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown ClassifierConfig keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ClassifierResult:
    model: ResNet1d18
    history: list = field(default_factory=list)
    best_epoch: int = 0


def predict_proba(model: nn.Module, x: np.ndarray | torch.Tensor, batch_size=64) -> np.ndarray:
    """Positive-class probability for each record."""
    xt = x if isinstance(x, torch.Tensor) else prepare_inputs(x)
    model.eval()
    out = []
    with torch.no_grad():
        for k in range(0, xt.shape[0], batch_size):
            out.append(torch.softmax(model(xt[k:k + batch_size]), dim=1)[:, 1])
    return torch.cat(out).double().numpy() if out else np.empty(0)


def _eval_loss(model, xt, y, cfg):
    model.eval()
    with torch.no_grad():
        probs = torch.softmax(model(xt), dim=1)
        return float(focal_loss(probs, torch.from_numpy(y), cfg.alpha, cfg.gamma))


def train_classifier(train: VariantDataset, cfg: ClassifierConfig,
                     val: VariantDataset | None = None,
                     stop: Callable[[ResNet1d18, dict], bool] | None = None) -> ClassifierResult:
    """Focal-loss training with Adam; returns the lowest-validation-loss weights.

    Without ``val`` the training loss selects the checkpoint. ``stop`` is
    called after every epoch and may end training early.
    """
    if len(np.unique(train.y)) < 2:
        raise SingleClassDataset("training split needs both classes")
    gen = torch.Generator().manual_seed(cfg.seed)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        model = ResNet1d18(train.x.shape[1], 2, cfg.width)
        he_init_(model)
    opt = Adam(model.parameters(), cfg.lr, cfg.weight_decay)
    result = ClassifierResult(model)
    xt = prepare_inputs(train.x)
    yt = torch.from_numpy(train.y)
    xv = prepare_inputs(val.x) if val is not None else None
    best = float("inf")
    best_state = copy.deepcopy(model.state_dict())
    n = xt.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = torch.randperm(n, generator=gen)
        losses = []
        for k in range(0, n, cfg.batch_size):
            idx = order[k:k + cfg.batch_size]
            if idx.numel() < 2:
                continue  # batch norm needs more than one sample
            opt.zero_grad()
            loss = focal_loss(torch.softmax(model(xt[idx]), dim=1), yt[idx], cfg.alpha, cfg.gamma)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(epoch, "focal loss")
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        row = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if val is not None:
            row["val_loss"] = _eval_loss(model, xv, val.y, cfg)
        score = row.get("val_loss", row["train_loss"])
        if score < best:
            best = score
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
        result.history.append(row)
        if stop is not None and stop(model, row):
            break
    model.load_state_dict(best_state)
    model.eval()
    return result


# -- metrics -------------------------------------------------------------------

def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    if labels.min(initial=1) == labels.max(initial=0) or len(np.unique(labels)) < 2:
        raise SingleClass("both classes must be present")
    return scores, labels


def auroc(scores, labels) -> float:
    """Mann-Whitney statistic with mid-ranks for ties."""
    scores, labels = _check_binary(scores, labels)
    ranks = rankdata(scores)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: sum over distinct thresholds of (recall step) x precision."""
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last_of_tie = np.r_[np.diff(s) != 0, True]
    tp = np.cumsum(y)[last_of_tie]
    fp = np.cumsum(1 - y)[last_of_tie]
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


METRICS = {"auroc": auroc, "auprc": auprc}


def bootstrap_ci(scores, labels, metric=auroc, n_boot=1000, level=0.95, seed=0,
                 max_retries=100) -> tuple[float, float]:
    """Percentile bootstrap; every resample has its own substream of ``seed``."""
    scores, labels = _check_binary(scores, labels)
    if isinstance(metric, str):
        metric = METRICS[metric]
    if min(labels.sum(), labels.size - labels.sum()) < 10:
        raise DegenerateResampling("need at least 10 samples per class")
    n = scores.size
    values = np.empty(n_boot)
    for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_boot)):
        rng = np.random.default_rng(child)
        for _ in range(max_retries):
            idx = rng.integers(0, n, size=n)
            if 0 < labels[idx].sum() < n:
                break
        else:
            raise DegenerateResampling(f"resample {b} stayed single-class after {max_retries} draws")
        values[b] = metric(scores[idx], labels[idx])
    tail = (1 - level) / 2 * 100
    lo, hi = np.percentile(values, [tail, 100 - tail])
    # a skewed resample distribution can leave the point estimate outside the
    # raw percentile band; widen the band to cover it
    point = metric(scores, labels)
    return float(min(lo, point)), float(max(hi, point))


@dataclass
class ClassifierReport:
    variant: str
    task: str
    auroc: float
    auroc_ci: tuple
    auprc: float
    auprc_ci: tuple
    n_test: int

    def to_json(self) -> str:
        d = asdict(self)
        d["auroc_ci"] = list(self.auroc_ci)
        d["auprc_ci"] = list(self.auprc_ci)
        return json.dumps(d, indent=1)


def evaluate_classifier(model, test: VariantDataset, task: str, n_boot=1000,
                        seed=0) -> ClassifierReport:
    scores = predict_proba(model, test.x)
    return ClassifierReport(test.variant.value, task,
                            auroc(scores, test.y), bootstrap_ci(scores, test.y, auroc, n_boot, seed=seed),
                            auprc(scores, test.y), bootstrap_ci(scores, test.y, auprc, n_boot, seed=seed),
                            int(test.y.size))
