"""Style, mapping, generator and discriminator networks, their objectives,
the adversarial training loop and the 12-lead synthesis entry points."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .dataset_io import DatasetManifest
from .errors import (EmptyDataset, InvalidTarget, MissingLead, ModeMismatch, NonFiniteLoss,
                     ShapeMismatch, UntrainedModel)
from .nn_substrate import (PROB_CLAMP, Adam, ResidualBlock, conv1d, he_init_, leaky_relu,
                           load_checkpoint, save_checkpoint)
from .signal_core import (DEGENERATE_STD, WINDOW_LEN, AsyncLeadPair, EcgRecord, LeadId,
                          denormalize_window, generated_set, normalize_window, window_stats)

log = logging.getLogger(__name__)

STYLE_DIM = 512


@dataclass
class TrainConfig:
    lambda_adv: float = 1.0
    lambda_rec: float = 2.0
    lambda_con: float = 1.0
    lambda_sty: float = 1.0
    lr_s: float = 3e-4
    lr_m: float = 1e-4
    lr_g: float = 3e-4
    lr_d: float = 1e-4
    weight_decay: float = 1e-4
    z_dim: int = 64
    batch_size: int = 16
    steps: int = 2000
    seed: int = 0
    mode: str = "t2t"
    window_len: int = WINDOW_LEN
    delay: float = 0.5
    channels: tuple = (8, 16, 32, 64)
    kernel_size: int = 3
    mapping_hidden: int = 256
    style_dim: int = STYLE_DIM
    val_every: int = 100
    val_size: int = 32

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        for name in ("lambda_adv", "lambda_rec", "lambda_con", "lambda_sty"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("lr_s", "lr_m", "lr_g", "lr_d"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.mode not in ("t2t", "s2e"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")
        if self.window_len % (2 ** len(self.channels)):
            raise ValueError("window_len must be divisible by 2**len(channels)")

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d


# -- networks ------------------------------------------------------------------

class _Trunk(nn.Module):
    """Stem conv followed by stride-2 plain residual blocks."""

    def __init__(self, in_ch, channels, kernel_size):
        super().__init__()
        self.stem = nn.Conv1d(in_ch, channels[0], kernel_size, 1, kernel_size // 2)
        chans = [channels[0], *channels]
        self.blocks = nn.ModuleList(
            ResidualBlock(a, b, stride=2, kernel_size=kernel_size)
            for a, b in zip(chans[:-1], chans[1:]))

    def forward(self, x):
        h = conv1d(x, self.stem.weight, self.stem.bias, 1, self.stem.padding[0])
        for block in self.blocks:
            h = block(h)
        return h


class StyleNet(nn.Module):
    """Shared conv trunk over the input lead stack, one 512-d head per target lead."""

    def __init__(self, in_ch, n_targets, channels, kernel_size=3, style_dim=STYLE_DIM):
        super().__init__()
        self.trunk = _Trunk(in_ch, channels, kernel_size)
        self.heads = nn.ModuleList(nn.Linear(channels[-1], style_dim) for _ in range(n_targets))

    def forward(self, x, target):
        h = leaky_relu(self.trunk(x)).mean(dim=2)
        out = torch.stack([head(h) for head in self.heads], dim=1)
        return out[torch.arange(x.shape[0]), target]


class MappingNet(nn.Module):
    def __init__(self, z_dim, n_targets, hidden=256, n_blocks=2, style_dim=STYLE_DIM):
        super().__init__()
        self.inp = nn.Linear(z_dim, hidden)
        self.blocks = nn.ModuleList(
            nn.ModuleList([nn.Linear(hidden, hidden), nn.Linear(hidden, hidden)])
            for _ in range(n_blocks))
        self.heads = nn.ModuleList(nn.Linear(hidden, style_dim) for _ in range(n_targets))

    def forward(self, z, target):
        h = self.inp(z)
        for fc1, fc2 in self.blocks:
            h = h + fc2(leaky_relu(fc1(leaky_relu(h))))
        h = leaky_relu(h)
        out = torch.stack([head(h) for head in self.heads], dim=1)
        return out[torch.arange(z.shape[0]), target]


class Generator(nn.Module):
    """Encoder of plain blocks, AdaIN bottleneck, AdaIN upsampling decoder."""

    def __init__(self, channels, kernel_size=3, style_dim=STYLE_DIM, n_bottleneck=4):
        super().__init__()
        self.encoder = _Trunk(1, channels, kernel_size)
        c = channels[-1]
        self.bottleneck = nn.ModuleList(
            ResidualBlock(c, c, mode="adain", style_dim=style_dim, kernel_size=kernel_size)
            for _ in range(n_bottleneck))
        chans = [channels[0], *channels][::-1]
        self.decoder = nn.ModuleList(
            ResidualBlock(a, b, mode="adain", style_dim=style_dim, kernel_size=kernel_size,
                          upsample=True)
            for a, b in zip(chans[:-1], chans[1:]))
        self.out = nn.Conv1d(channels[0], 1, 1)

    def shrink_output_init(self, factor=0.1):
        # start near the identity style (scale 1, bias 0) and a small output signal
        with torch.no_grad():
            for block in [*self.bottleneck, *self.decoder]:
                block.style1.weight.mul_(factor)
                block.style2.weight.mul_(factor)
            self.out.weight.mul_(factor)

    def forward(self, x, style):
        if x.dim() != 3 or x.shape[1] != 1:
            raise ShapeMismatch(f"generator input must be (B, 1, L), got {tuple(x.shape)}")
        h = self.encoder(x)
        for block in self.bottleneck:
            h = block(h, style)
        for block in self.decoder:
            h = block(h, style)
        return conv1d(h, self.out.weight, self.out.bias)


class Discriminator(nn.Module):
    """Downsampling trunk with one real/fake logit per generated lead."""

    def __init__(self, n_targets, channels, kernel_size=3):
        super().__init__()
        self.trunk = _Trunk(1, channels, kernel_size)
        self.head = nn.Linear(channels[-1], n_targets)

    def forward(self, x, target=None):
        logits = self.head(leaky_relu(self.trunk(x)).mean(dim=2))
        if target is None:
            return logits
        return logits[torch.arange(x.shape[0]), target]


NETWORKS = ("S", "M", "G", "D")


class NetworkBundle:
    """The four networks, their optimizers and bookkeeping for one mode."""

    def __init__(self, cfg: TrainConfig, dtype=torch.float32):
        self.cfg = cfg
        self.mode = cfg.mode
        self.targets = generated_set(cfg.mode)
        n = len(self.targets)
        in_ch = 2 if cfg.mode == "t2t" else 1
        gen = torch.Generator().manual_seed(cfg.seed)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(int(torch.randint(0, 2**31 - 1, (1,), generator=gen)))
            self.S = StyleNet(in_ch, n, cfg.channels, cfg.kernel_size, cfg.style_dim)
            self.M = MappingNet(cfg.z_dim, n, cfg.mapping_hidden, style_dim=cfg.style_dim)
            self.G = Generator(cfg.channels, cfg.kernel_size, cfg.style_dim)
            self.D = Discriminator(n, cfg.channels, cfg.kernel_size)
            for net in self.nets.values():
                he_init_(net)
                net.to(dtype)
            self.G.shrink_output_init()
        lrs = {"S": cfg.lr_s, "M": cfg.lr_m, "G": cfg.lr_g, "D": cfg.lr_d}
        self.optim = {k: Adam(net.parameters(), lrs[k], cfg.weight_decay)
                      for k, net in self.nets.items()}
        self.step = 0
        self.dtype = dtype

    @property
    def nets(self) -> dict[str, nn.Module]:
        return {"S": self.S, "M": self.M, "G": self.G, "D": self.D}

    def target_index(self, lead: LeadId) -> int:
        try:
            return self.targets.index(LeadId(lead))
        except ValueError:
            raise InvalidTarget(f"{LeadId(lead).name} is not generated in {self.mode} mode") from None

    def weights(self) -> dict[str, dict[str, torch.Tensor]]:
        return {k: {n: t.detach().clone() for n, t in net.state_dict().items()}
                for k, net in self.nets.items()}

    def load_weights(self, weights):
        for k, net in self.nets.items():
            net.load_state_dict({n: t.to(self.dtype) for n, t in weights[k].items()})

    def save(self, path, weights=None, extra_meta=None):
        groups = dict(weights or self.weights())
        for k, opt in self.optim.items():
            groups[f"adam.{k}"] = opt.state_tensors()
        meta = {"mode": self.mode, "config": self.cfg.to_dict(), "step": self.step,
                "adam_t": {k: opt.state.t for k, opt in self.optim.items()},
                "networks": list(NETWORKS)}
        meta.update(extra_meta or {})
        save_checkpoint(path, groups, meta)

    @classmethod
    def load(cls, path) -> "NetworkBundle":
        path = Path(path)
        if not path.exists():
            raise UntrainedModel(f"no checkpoint at {path}")
        groups, meta = load_checkpoint(path)
        bundle = cls(TrainConfig.from_dict(meta["config"]))
        bundle.load_weights(groups)
        for k, opt in bundle.optim.items():
            opt.load_state_tensors(groups.get(f"adam.{k}", {}), meta["adam_t"][k])
        bundle.step = int(meta["step"])
        bundle.meta = meta
        return bundle


def require_mode(nets, mode):
    if nets is None:
        raise UntrainedModel("no trained networks supplied")
    if nets.mode != mode:
        raise ModeMismatch(f"checkpoint is {nets.mode}, operation needs {mode}")


# -- batches and objectives ----------------------------------------------------

def normalize_batch(x: torch.Tensor) -> torch.Tensor:
    """Per-row z-score over the last axis; flat rows become zeros."""
    mean = x.mean(dim=-1, keepdim=True)
    std = x.std(dim=-1, unbiased=False, keepdim=True)
    flat = std < DEGENERATE_STD
    return torch.where(flat, torch.zeros_like(x), (x - mean) / torch.where(flat, 1.0, std))


@dataclass
class GanBatch:
    """Normalized windows, all (B, 1, L) except ``style_input`` (B, 1 or 2, L).

    ``x_i``/``x_ii`` are time-aligned with ``x_target``; ``style_input`` holds
    Lead I and the delayed Lead II window (Lead I only in s2e mode).
    """

    x_i: torch.Tensor
    x_ii: torch.Tensor | None
    x_target: torch.Tensor
    style_input: torch.Tensor
    target: torch.Tensor
    z: torch.Tensor
    source: str = "I"

    @property
    def x_source(self):
        return self.x_i if self.source == "I" or self.x_ii is None else self.x_ii


def adv_from_logits(real_logits, fake_logits):
    """(d_loss, g_loss) from discriminator logits, probabilities clamped to [1e-7, 1-1e-7]."""
    p_real = torch.sigmoid(real_logits).clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    p_fake = torch.sigmoid(fake_logits).clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    d_loss = -(torch.log(p_real).mean() + torch.log(1 - p_fake).mean())
    g_loss = -torch.log(p_fake).mean()
    return d_loss, g_loss


def mse(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).pow(2).mean()


def loss_adv(nets: NetworkBundle, batch: GanBatch):
    c = nets.S(batch.style_input, batch.target)
    fake = nets.G(batch.x_i, c)
    return adv_from_logits(nets.D(batch.x_target, batch.target), nets.D(fake, batch.target))


def loss_rec(nets: NetworkBundle, batch: GanBatch):
    c = nets.S(batch.style_input, batch.target)
    return mse(nets.G(batch.x_source, c), batch.x_target)


def loss_con(nets: NetworkBundle, batch: GanBatch):
    if batch.x_ii is None:
        raise ShapeMismatch("lead consistency needs both Lead I and Lead II")
    c = nets.S(batch.style_input, batch.target)
    return mse(nets.G(batch.x_i, c), nets.G(batch.x_ii, c))


def loss_sty(nets: NetworkBundle, batch: GanBatch):
    return (nets.M(batch.z, batch.target) - nets.S(batch.style_input, batch.target)).abs().mean()


def generator_side(nets: NetworkBundle, batch: GanBatch, cfg: TrainConfig):
    """All generator-side terms with shared forward passes.

    Returns (fake_from_lead_i, terms) where terms maps g_adv/l_rec/l_con/l_sty
    to scalars; g_adv is left for the caller because it depends on D.
    """
    c = nets.S(batch.style_input, batch.target)
    b = batch.x_i.shape[0]
    if batch.x_ii is not None:
        both = nets.G(torch.cat([batch.x_i, batch.x_ii]), torch.cat([c, c]))
        fake_i, fake_ii = both[:b], both[b:]
        l_con = mse(fake_i, fake_ii)
        fake_src = fake_i if batch.source == "I" else fake_ii
    else:
        fake_i = fake_src = nets.G(batch.x_i, c)
        l_con = torch.zeros((), dtype=fake_i.dtype)
    l_rec = mse(fake_src, batch.x_target)
    l_sty = (nets.M(batch.z, batch.target) - c).abs().mean()
    return fake_i, {"l_rec": l_rec, "l_con": l_con, "l_sty": l_sty}


def weighted_total(terms, cfg: TrainConfig):
    return (cfg.lambda_adv * terms["g_adv"] + cfg.lambda_rec * terms["l_rec"]
            + cfg.lambda_con * terms["l_con"] + cfg.lambda_sty * terms["l_sty"])


class WindowSampler:
    """Draws training batches from a stack of records shaped (N, 12, T)."""

    def __init__(self, records: Sequence[EcgRecord], cfg: TrainConfig, targets):
        if not records:
            raise EmptyDataset("no records to sample from")
        fs = records[0].sampling_rate
        n = min(r.n_samples for r in records)
        for r in records:
            for lead in LeadId:
                if lead not in r.leads:
                    raise MissingLead(f"record {r.record_id} lacks {lead.name}")
        self.data = np.stack([r.as_array()[:, :n] for r in records]).astype(np.float32)
        self.cfg = cfg
        self.delay = int(round(cfg.delay * fs))
        self.max_t0 = n - cfg.window_len - self.delay
        if self.max_t0 < 0:
            raise EmptyDataset("records are shorter than window plus delay")
        self.target_leads = np.array([int(t) for t in targets])

    def draw(self, rng: np.random.Generator, size: int, z_gen: torch.Generator,
             source: str = "I", dtype=torch.float32) -> GanBatch:
        rec = rng.integers(0, self.data.shape[0], size=size)
        t0 = rng.integers(0, self.max_t0 + 1, size=size)
        tgt = rng.integers(0, len(self.target_leads), size=size)
        z = torch.randn(size, self.cfg.z_dim, generator=z_gen, dtype=dtype)
        return self.assemble(rec, t0, tgt, z, source, dtype)

    def assemble(self, rec, t0, tgt, z, source="I", dtype=torch.float32) -> GanBatch:
        L = self.cfg.window_len
        span = t0[:, None] + np.arange(L)[None, :]

        def cut(lead_idx, offset=0):
            lead_idx = np.broadcast_to(np.asarray(lead_idx), rec.shape)
            w = self.data[rec[:, None], lead_idx[:, None], span + offset]
            return normalize_batch(torch.from_numpy(np.ascontiguousarray(w)).to(dtype)).unsqueeze(1)

        x_i = cut(int(LeadId.I))
        x_target = cut(self.target_leads[tgt])
        if self.cfg.mode == "t2t":
            x_ii = cut(int(LeadId.II))
            style_input = torch.cat([x_i, cut(int(LeadId.II), self.delay)], dim=1)
        else:
            x_ii = None
            style_input = x_i
        return GanBatch(x_i, x_ii, x_target, style_input, torch.from_numpy(tgt).long(), z,
                        source)


@dataclass
class TrainResult:
    bundle: NetworkBundle
    history: list = field(default_factory=list)
    val_history: list = field(default_factory=list)
    best_step: int = 0
    best_weights: dict | None = None


def _records_by_split(dataset):
    if isinstance(dataset, DatasetManifest):
        return dataset.load("train"), dataset.load("val")
    if isinstance(dataset, Mapping):
        return list(dataset.get("train", [])), list(dataset.get("val", []))
    return list(dataset), []


def _val_schedule(step, every):
    return step % every == 0 or (step <= 50 and step % 10 == 0)


def evaluate(nets: NetworkBundle, batch: GanBatch, cfg: TrainConfig) -> dict:
    with torch.no_grad():
        fake_i, terms = generator_side(nets, batch, cfg)
        terms["g_adv"] = adv_from_logits(nets.D(batch.x_target, batch.target),
                                         nets.D(fake_i, batch.target))[1]
        out = {k: float(v) for k, v in terms.items()}
    out["total"] = float(weighted_total(out, cfg))
    return out


def train_step(bundle: NetworkBundle, batch: GanBatch, cfg: TrainConfig) -> dict:
    """One discriminator update then one generator-side update (S, M, G)."""
    step = bundle.step + 1
    fake_i, terms = generator_side(bundle, batch, cfg)

    opt_d = bundle.optim["D"]
    opt_d.zero_grad()
    d_loss, _ = adv_from_logits(bundle.D(batch.x_target, batch.target),
                                bundle.D(fake_i.detach(), batch.target))
    if not torch.isfinite(d_loss):
        raise NonFiniteLoss(step, "d_loss")
    d_loss.backward()
    opt_d.step()

    for k in ("S", "M", "G"):
        bundle.optim[k].zero_grad()
    # D has just been updated; G's parameters have not, so fake_i is still current
    terms["g_adv"] = -torch.log(torch.sigmoid(bundle.D(fake_i, batch.target))
                                .clamp(PROB_CLAMP, 1 - PROB_CLAMP)).mean()
    total = weighted_total(terms, cfg)
    if not torch.isfinite(total):
        bad = [k for k, v in terms.items() if not torch.isfinite(v)]
        raise NonFiniteLoss(step, ",".join(bad))
    total.backward()
    for k in ("S", "M", "G"):
        bundle.optim[k].step()
    bundle.optim["D"].zero_grad()
    bundle.step = step

    row = {"step": step, "d_loss": float(d_loss.detach())}
    row.update({k: float(terms[k].detach()) for k in ("g_adv", "l_rec", "l_con", "l_sty")})
    return row


def train(dataset, cfg: TrainConfig, resume: NetworkBundle | None = None,
          progress=None) -> TrainResult:
    """Alternating discriminator / generator-side updates.

    ``dataset`` is a DatasetManifest with splits, a mapping {"train": [...],
    "val": [...]} of records, or a plain list of training records (which then
    doubles as the validation pool). The best generator-side validation total
    selects ``best_weights``; ``bundle`` holds the final state so training can
    be resumed.
    """
    train_recs, val_recs = _records_by_split(dataset)
    if not train_recs:
        raise EmptyDataset("training split is empty")
    bundle = resume or NetworkBundle(cfg)
    if resume is not None and resume.mode != cfg.mode:
        raise ModeMismatch(f"cannot resume a {resume.mode} checkpoint in {cfg.mode} mode")
    result = TrainResult(bundle)
    if cfg.steps == 0:
        result.best_weights = bundle.weights()
        result.best_step = bundle.step
        return result

    sampler = WindowSampler(train_recs, cfg, bundle.targets)
    val_sampler = WindowSampler(val_recs or train_recs, cfg, bundle.targets)
    val_rng = np.random.default_rng([cfg.seed, 1])
    val_batch = val_sampler.draw(val_rng, cfg.val_size, torch.Generator().manual_seed(cfg.seed + 1))

    start = bundle.step
    rng = np.random.default_rng([cfg.seed, start])
    z_gen = torch.Generator().manual_seed(cfg.seed * 1000003 + start)
    best_total = math.inf
    for net in bundle.nets.values():
        net.train()

    for step in range(start, start + cfg.steps):
        source = "I" if step % 2 == 0 or cfg.mode == "s2e" else "II"
        batch = sampler.draw(rng, cfg.batch_size, z_gen, source)
        row = train_step(bundle, batch, cfg)
        result.history.append(row)

        if _val_schedule(bundle.step, cfg.val_every) or bundle.step == start + cfg.steps:
            val = evaluate(bundle, val_batch, cfg)
            val["step"] = bundle.step
            result.val_history.append(val)
            if val["total"] < best_total:
                best_total = val["total"]
                result.best_step = bundle.step
                result.best_weights = bundle.weights()
            if progress:
                progress(row, val)
    return result


def save_history(result: TrainResult, path):
    Path(path).write_text(json.dumps({"history": result.history,
                                      "validation": result.val_history,
                                      "best_step": result.best_step}, indent=1) + "\n")


# -- inference -----------------------------------------------------------------

@dataclass(frozen=True)
class StyleCode:
    vector: np.ndarray
    target_lead: LeadId

    def __post_init__(self):
        if self.vector.shape != (STYLE_DIM,):
            raise ShapeMismatch(f"style codes are {STYLE_DIM}-d, got {self.vector.shape}")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("style code has non-finite entries")


def _as_batch(x, nets):
    return torch.as_tensor(np.asarray(x, dtype=np.float64)).to(nets.dtype).view(1, 1, -1)


def _style_input(pair: AsyncLeadPair, nets):
    li = normalize_window(pair.lead_i)
    if nets.mode == "s2e":
        return _as_batch(li, nets)
    lii = normalize_window(pair.lead_ii)
    return torch.cat([_as_batch(li, nets), _as_batch(lii, nets)], dim=1)


def style_encode(pair: AsyncLeadPair, target: LeadId, nets: NetworkBundle) -> StyleCode:
    idx = nets.target_index(target)
    with torch.no_grad():
        code = nets.S(_style_input(pair, nets), torch.tensor([idx]))
    return StyleCode(code[0].double().numpy(), LeadId(target))


def map_latent(z, target: LeadId, nets: NetworkBundle) -> StyleCode:
    idx = nets.target_index(target)
    z = torch.as_tensor(np.asarray(z, dtype=np.float64)).to(nets.dtype).view(1, -1)
    if z.shape[1] != nets.cfg.z_dim:
        raise ShapeMismatch(f"z must have {nets.cfg.z_dim} entries")
    with torch.no_grad():
        code = nets.M(z, torch.tensor([idx]))
    return StyleCode(code[0].double().numpy(), LeadId(target))


def generate_lead(source, code: StyleCode, nets: NetworkBundle) -> np.ndarray:
    """G(source, code) for one normalized window; output is in normalized units."""
    source = np.asarray(source, dtype=np.float64)
    if source.ndim != 1 or source.size != nets.cfg.window_len:
        raise ShapeMismatch(f"source window must have {nets.cfg.window_len} samples")
    with torch.no_grad():
        out = nets.G(_as_batch(source, nets),
                     torch.as_tensor(code.vector).to(nets.dtype).view(1, -1))
    return out[0, 0].double().numpy()


def _generate_all(pair: AsyncLeadPair, nets, targets) -> dict[LeadId, np.ndarray]:
    style_in = _style_input(pair, nets)
    idx = torch.tensor([nets.target_index(t) for t in targets])
    src = _as_batch(normalize_window(pair.lead_i), nets)
    with torch.no_grad():
        codes = nets.S(style_in.expand(len(targets), -1, -1), idx)
        out = nets.G(src.expand(len(targets), -1, -1), codes)
    stats = window_stats(pair.lead_i)
    return {t: denormalize_window(out[k, 0].double().numpy(), stats)
            for k, t in enumerate(targets)}


def synthesize_twelve(pair: AsyncLeadPair, nets: NetworkBundle, record_id="synth",
                      label="normal") -> EcgRecord:
    """Lead I and Lead II pass through; III..V6 are generated from Lead I."""
    require_mode(nets, "t2t")
    leads = {LeadId.I: pair.lead_i.copy(), LeadId.II: pair.lead_ii.copy()}
    leads.update(_generate_all(pair, nets, nets.targets))
    return EcgRecord(pair.fs, leads, label=label, record_id=record_id)


def synthesize_from_one(lead_i_window, nets: NetworkBundle, fs=500, record_id="synth",
                        label="normal") -> EcgRecord:
    """Lead I passes through; II..V6 are generated from it."""
    require_mode(nets, "s2e")
    li = np.asarray(lead_i_window, dtype=np.float64)
    pair = AsyncLeadPair(li, li, li.size, 0.0, 0.0, fs, window_stats(li), window_stats(li))
    leads = {LeadId.I: li.copy()}
    leads.update(_generate_all(pair, nets, nets.targets))
    return EcgRecord(fs, leads, label=label, record_id=record_id)


def load_for_inference(path) -> NetworkBundle:
    """Load a checkpoint and switch it to evaluation mode."""
    bundle = NetworkBundle.load(path)
    for net in bundle.nets.values():
        net.eval()
    return bundle


def clone_bundle(bundle: NetworkBundle, weights=None) -> NetworkBundle:
    out = copy.deepcopy(bundle)
    if weights is not None:
        out.load_weights(weights)
    return out
