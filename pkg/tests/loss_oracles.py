"""Tiny network configs, random GAN batches and scalar-loop loss oracles."""

import math

import torch

from ecgt2t.model import GanBatch, TrainConfig
from ecgt2t.nn_substrate import PROB_CLAMP

TINY = dict(channels=(2, 2), window_len=16, mapping_hidden=8, z_dim=4, batch_size=4,
            val_size=4, val_every=2)


def tiny_cfg(**kw):
    return TrainConfig(**{**TINY, **kw})


def random_batch(cfg, b=3, seed=0, source="I", dtype=torch.float64):
    g = torch.Generator().manual_seed(seed)
    L = cfg.window_len

    def r(*shape):
        return torch.randn(*shape, generator=g, dtype=dtype)

    n_targets = 10 if cfg.mode == "t2t" else 11
    x_i = r(b, 1, L)
    x_ii = r(b, 1, L) if cfg.mode == "t2t" else None
    style_in = torch.cat([x_i, r(b, 1, L)], dim=1) if cfg.mode == "t2t" else x_i
    target = torch.randint(0, n_targets, (b,), generator=g)
    return GanBatch(x_i, x_ii, r(b, 1, L), style_in, target, r(b, cfg.z_dim), source)


def _flat(t):
    return t.detach().reshape(t.shape[0], -1).tolist()


def _mse_loop(a, b):
    total, n = 0.0, 0
    for ra, rb in zip(_flat(a), _flat(b)):
        for u, v in zip(ra, rb):
            total += (u - v) ** 2
            n += 1
    return total / n


def _clamped_sigmoid(v):
    return min(max(1 / (1 + math.exp(-v)), PROB_CLAMP), 1 - PROB_CLAMP)


def adv_oracle(nets, batch):
    """(d_loss, g_loss) from per-element python loops over the D logits."""
    with torch.no_grad():
        c = nets.S(batch.style_input, batch.target)
        fake = nets.G(batch.x_i, c)
        real_all = nets.D(batch.x_target).tolist()
        fake_all = nets.D(fake).tolist()
    tgt = batch.target.tolist()
    b = len(tgt)
    log_real = sum(math.log(_clamped_sigmoid(real_all[k][tgt[k]])) for k in range(b)) / b
    log_fake = sum(math.log(1 - _clamped_sigmoid(fake_all[k][tgt[k]])) for k in range(b)) / b
    g = -sum(math.log(_clamped_sigmoid(fake_all[k][tgt[k]])) for k in range(b)) / b
    return -(log_real + log_fake), g


def rec_oracle(nets, batch):
    with torch.no_grad():
        c = nets.S(batch.style_input, batch.target)
        fake = nets.G(batch.x_i if batch.source == "I" else batch.x_ii, c)
    return _mse_loop(fake, batch.x_target)


def con_oracle(nets, batch):
    with torch.no_grad():
        c = nets.S(batch.style_input, batch.target)
        a, b = nets.G(batch.x_i, c), nets.G(batch.x_ii, c)
    return _mse_loop(a, b)


def sty_oracle(nets, batch):
    with torch.no_grad():
        m = nets.M(batch.z, batch.target)
        s = nets.S(batch.style_input, batch.target)
    total, n = 0.0, 0
    for rm, rs in zip(_flat(m), _flat(s)):
        for u, v in zip(rm, rs):
            total += abs(u - v)
            n += 1
    return total / n
