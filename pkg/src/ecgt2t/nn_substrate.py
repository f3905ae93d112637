"""Layer primitives, the Adam update, focal loss and the weight checkpoint format.

Tensors are torch tensors laid out as (batch, channels, length) or
(batch, features). Gradients come from torch autograd; every op here is
checked against central finite differences in the test-suite.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .errors import FormatError, InvalidProbability, ShapeMismatch

LEAKY_SLOPE = 0.2
NORM_EPS = 1e-5


def conv1d(x, weight, bias=None, stride=1, padding=0):
    if x.dim() != 3 or weight.dim() != 3:
        raise ShapeMismatch(f"conv1d expects 3-D input and weight, got {tuple(x.shape)} / "
                            f"{tuple(weight.shape)}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatch("bias must have one entry per output channel")
    out_len = (x.shape[2] + 2 * padding - weight.shape[2]) // stride + 1
    if out_len < 1:
        raise ShapeMismatch(f"output length {out_len} < 1")
    return F.conv1d(x, weight, bias, stride=stride, padding=padding)


def instance_norm(x, eps=NORM_EPS):
    """Normalize each (batch, channel) row over its length."""
    if x.dim() != 3 or x.shape[2] < 2:
        raise ShapeMismatch("instance_norm expects (B, C, L) with L >= 2")
    return F.instance_norm(x, eps=eps)


def adain(x, style_scale, style_bias, eps=NORM_EPS):
    b, c = x.shape[:2]
    if style_scale.shape != (b, c) or style_bias.shape != (b, c):
        raise ShapeMismatch(f"style scale/bias must be {(b, c)}, got {tuple(style_scale.shape)} "
                            f"and {tuple(style_bias.shape)}")
    return style_scale.unsqueeze(2) * instance_norm(x, eps) + style_bias.unsqueeze(2)


def leaky_relu(x):
    return F.leaky_relu(x, LEAKY_SLOPE)


def he_init_(module: nn.Module) -> None:
    """Weights ~ N(0, 2/fan_in), biases zero, for every conv and linear layer."""
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Linear)):
            fan_in = m.weight[0].numel()
            with torch.no_grad():
                m.weight.normal_(0.0, math.sqrt(2.0 / fan_in))
                if m.bias is not None:
                    m.bias.zero_()


class ResidualBlock(nn.Module):
    """Two conv/norm/activation stages plus a shortcut.

    ``mode="adain"`` replaces both instance norms by AdaIN whose scale and bias
    are affine projections of a style vector (scale = 1 + projection).
    ``stride=2`` halves the length; ``upsample=True`` doubles it first.
    """

    def __init__(self, in_ch, out_ch, stride=1, mode="plain", style_dim=None,
                 kernel_size=3, upsample=False):
        super().__init__()
        if mode not in ("plain", "adain"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "adain" and not style_dim:
            raise ValueError("adain mode needs style_dim")
        self.mode = mode
        self.stride = stride
        self.upsample = upsample
        self.out_ch = out_ch
        pad = kernel_size // 2
        self.pad = pad
        self.conv1 = nn.Conv1d(in_ch, out_ch, kernel_size, stride, pad)
        self.conv2 = nn.Conv1d(out_ch, out_ch, kernel_size, 1, pad)
        self.shortcut = None
        if in_ch != out_ch or stride > 1:
            self.shortcut = nn.Conv1d(in_ch, out_ch, 1, stride, 0, bias=False)
        if mode == "adain":
            self.style1 = nn.Linear(style_dim, 2 * out_ch)
            self.style2 = nn.Linear(style_dim, 2 * out_ch)

    def _norm(self, h, proj, style):
        if self.mode == "plain":
            return instance_norm(h)
        scale, bias = proj(style).chunk(2, dim=1)
        return adain(h, 1.0 + scale, bias)

    def forward(self, x, style=None):
        if self.mode == "adain" and style is None:
            raise ShapeMismatch("adain block called without a style vector")
        if self.upsample:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
        c = self.conv1
        h = conv1d(x, c.weight, c.bias, self.stride, self.pad)
        h = leaky_relu(self._norm(h, getattr(self, "style1", None), style))
        c = self.conv2
        h = conv1d(h, c.weight, c.bias, 1, self.pad)
        h = leaky_relu(self._norm(h, getattr(self, "style2", None), style))
        skip = x if self.shortcut is None else conv1d(x, self.shortcut.weight, None, self.stride)
        return h + skip


def residual_block(x, block: ResidualBlock, style=None):
    return block(x, style)


@dataclass
class AdamState:
    learning_rate: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState) -> None:
    """Decoupled weight decay followed by a bias-corrected Adam update, in place."""
    params = list(params)
    grads = list(grads)
    if state.learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    if len(params) != len(grads):
        raise ShapeMismatch("one gradient per parameter required")
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ShapeMismatch("optimizer state does not match parameter list")
    state.t += 1
    lr, wd, b1, b2 = state.learning_rate, state.weight_decay, state.beta1, state.beta2
    c1 = 1 - b1 ** state.t
    c2 = 1 - b2 ** state.t
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if g is None:
                g = torch.zeros_like(p)
            if p.shape != g.shape or m.shape != p.shape:
                raise ShapeMismatch(f"parameter {tuple(p.shape)} vs gradient {tuple(g.shape)}")
            if wd:
                p.mul_(1 - lr * wd)
            m.mul_(b1).add_(g, alpha=1 - b1)
            v.mul_(b2).addcmul_(g, g, value=1 - b2)
            p.sub_(lr * (m / c1) / ((v / c2).sqrt() + state.eps))


class Adam:
    """Holds a parameter list and its AdamState; gradients are read from ``.grad``."""

    def __init__(self, params, lr, weight_decay=0.0):
        self.params = [p for p in params]
        self.state = AdamState(lr, weight_decay)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state)

    def state_tensors(self) -> dict[str, torch.Tensor]:
        out = {}
        for k, (m, v) in enumerate(zip(self.state.m, self.state.v)):
            out[f"m.{k}"] = m
            out[f"v.{k}"] = v
        return out

    def load_state_tensors(self, tensors: dict, t: int):
        n = len(self.params)
        if tensors:
            self.state.m = [tensors[f"m.{k}"].clone() for k in range(n)]
            self.state.v = [tensors[f"v.{k}"].clone() for k in range(n)]
        self.state.t = int(t)


PROB_CLAMP = 1e-7


def focal_loss(probs, labels, alpha=0.5, gamma=2.0):
    """Mean over the batch of -alpha (1 - p_true)^gamma log p_true."""
    if probs.dim() != 2:
        raise ShapeMismatch("probs must be (batch, classes)")
    with torch.no_grad():
        if torch.any(probs < 0) or torch.any((probs.sum(dim=1) - 1).abs() > 1e-5):
            raise InvalidProbability("probability rows must be non-negative and sum to 1")
    labels = torch.as_tensor(labels, dtype=torch.long)
    p = probs.gather(1, labels.view(-1, 1)).squeeze(1).clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    return (-alpha * (1 - p).pow(gamma) * torch.log(p)).mean()


# -- weight checkpoints --------------------------------------------------------
#
# b"ECGW1\0", u32 header length, JSON header, then f32 little-endian blobs.
# header = {"meta": {...}, "tensors": [{"group", "name", "shape", "offset", "count"}]}

CKPT_MAGIC = b"ECGW1\x00"


def save_checkpoint(path, groups: dict[str, dict[str, torch.Tensor]], meta: dict | None = None):
    entries = []
    blobs = []
    offset = 0
    for group in groups:
        for name, tensor in groups[group].items():
            arr = tensor.detach().cpu().numpy().astype("<f4")
            entries.append({"group": group, "name": name, "shape": list(arr.shape),
                            "offset": offset, "count": int(arr.size)})
            blobs.append(arr.tobytes())
            offset += arr.nbytes
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    data = Path(path).read_bytes()
    if data[:6] != CKPT_MAGIC:
        raise FormatError(f"{path} is not a weight checkpoint")
    if len(data) < 10:
        raise FormatError("truncated checkpoint header")
    (hlen,) = struct.unpack_from("<I", data, 6)
    try:
        header = json.loads(data[10:10 + hlen])
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from None
    base = 10 + hlen
    groups: dict[str, dict[str, torch.Tensor]] = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        end = start + 4 * e["count"]
        if end > len(data):
            raise FormatError(f"tensor {e['group']}/{e['name']} is truncated")
        arr = np.frombuffer(data[start:end], dtype="<f4").reshape(e["shape"])
        groups.setdefault(e["group"], {})[e["name"]] = torch.from_numpy(arr.astype(np.float32))
    return groups, header["meta"]
