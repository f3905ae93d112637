import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ecgt2t.errors import (InvalidTarget, ModeMismatch, NonFiniteLoss, ShapeMismatch,
                           UntrainedModel)
from ecgt2t.model import (STYLE_DIM, NetworkBundle, StyleCode, TrainConfig,
                          adv_from_logits, clone_bundle, generate_lead, generator_side,
                          load_for_inference, loss_adv, loss_con, loss_rec, loss_sty,
                          map_latent, mse, style_encode, synthesize_from_one,
                          synthesize_twelve, train, train_step, weighted_total)
from ecgt2t.nn_substrate import PROB_CLAMP, Adam
from ecgt2t.signal_core import LeadId, extract_async_pair
from ecgt2t.synth_data import make_corpus

from gradcheck import relative_error
from loss_oracles import (adv_oracle, con_oracle, random_batch, rec_oracle, sty_oracle,
                          tiny_cfg)

@pytest.fixture(scope="module")
def tiny64():
    return NetworkBundle(tiny_cfg(), dtype=torch.float64)


@pytest.fixture(scope="module")
def corpus():
    return make_corpus(4, 2, 2, duration=5.0, seed=11)


@pytest.fixture(scope="module")
def pair(corpus):
    return extract_async_pair(corpus[0], 0.3, 0.5, 16)


# -- style codes and generation --------------------------------------------------

def test_style_encode_deterministic_and_512(tiny64, pair):
    for lead in tiny64.targets:
        a = style_encode(pair, lead, tiny64)
        b = style_encode(pair, lead, tiny64)
        assert a.vector.shape == (STYLE_DIM,)
        np.testing.assert_array_equal(a.vector, b.vector)


def test_style_encode_targets_differ(tiny64, pair):
    a = style_encode(pair, LeadId.V1, tiny64)
    b = style_encode(pair, LeadId.V5, tiny64)
    assert not np.array_equal(a.vector, b.vector)


def test_style_encode_rejects_source_lead(tiny64, pair):
    with pytest.raises(InvalidTarget):
        style_encode(pair, LeadId.I, tiny64)


def test_map_latent(tiny64):
    z = np.linspace(-1, 1, 4)
    a = map_latent(z, LeadId.III, tiny64)
    np.testing.assert_array_equal(a.vector, map_latent(z, LeadId.III, tiny64).vector)
    assert a.vector.shape == (STYLE_DIM,)
    assert not np.array_equal(a.vector, map_latent(-z, LeadId.III, tiny64).vector)
    with pytest.raises(ShapeMismatch):
        map_latent(np.zeros(5), LeadId.III, tiny64)


def test_style_code_validation():
    with pytest.raises(ShapeMismatch):
        StyleCode(np.zeros(64), LeadId.V1)
    with pytest.raises(ValueError):
        StyleCode(np.full(STYLE_DIM, np.nan), LeadId.V1)


def test_generate_lead_contract(tiny64, pair):
    code = style_encode(pair, LeadId.V2, tiny64)
    src = np.sin(np.linspace(0, 6, 16))
    out = generate_lead(src, code, tiny64)
    assert out.shape == src.shape
    np.testing.assert_array_equal(out, generate_lead(src, code, tiny64))
    with pytest.raises(ShapeMismatch):
        generate_lead(np.zeros(15), code, tiny64)


def test_generate_lead_code_sensitivity(tiny64, pair):
    code = style_encode(pair, LeadId.V2, tiny64)
    src = np.sin(np.linspace(0, 6, 16))
    bumped = code.vector.copy()
    bumped[7] += 0.5
    out_a = generate_lead(src, code, tiny64)
    out_b = generate_lead(src, StyleCode(bumped, LeadId.V2), tiny64)
    assert np.max(np.abs(out_a - out_b)) > 1e-9


# -- losses against scalar-loop oracles ----------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_adv_scalar_oracle(tiny64, seed):
    batch = random_batch(tiny64.cfg, b=4, seed=seed)
    d_loss, g_loss = loss_adv(tiny64, batch)
    d_ref, g_ref = adv_oracle(tiny64, batch)
    assert abs(d_loss.item() - d_ref) < 1e-6
    assert abs(g_loss.item() - g_ref) < 1e-6


@pytest.mark.parametrize("source", ["I", "II"])
def test_loss_rec_scalar_oracle(tiny64, source):
    batch = random_batch(tiny64.cfg, b=4, seed=5, source=source)
    assert abs(loss_rec(tiny64, batch).item() - rec_oracle(tiny64, batch)) < 1e-6


def test_loss_con_scalar_oracle(tiny64):
    batch = random_batch(tiny64.cfg, b=4, seed=6)
    assert abs(loss_con(tiny64, batch).item() - con_oracle(tiny64, batch)) < 1e-6


def test_loss_sty_scalar_oracle(tiny64):
    batch = random_batch(tiny64.cfg, b=4, seed=7)
    assert abs(loss_sty(tiny64, batch).item() - sty_oracle(tiny64, batch)) < 1e-6


def test_generator_side_matches_separate_losses(tiny64):
    cfg = tiny64.cfg
    for source in ("I", "II"):
        batch = random_batch(cfg, b=4, seed=8, source=source)
        with torch.no_grad():
            _, terms = generator_side(tiny64, batch, cfg)
            assert abs(terms["l_rec"].item() - loss_rec(tiny64, batch).item()) < 1e-12
            assert abs(terms["l_con"].item() - loss_con(tiny64, batch).item()) < 1e-12
            assert abs(terms["l_sty"].item() - loss_sty(tiny64, batch).item()) < 1e-12


def test_d_loss_at_half_probability(tiny64):
    nets = clone_bundle(tiny64)
    with torch.no_grad():
        nets.D.head.weight.zero_()
        nets.D.head.bias.zero_()
    d_loss, g_loss = loss_adv(nets, random_batch(nets.cfg, seed=1))
    assert abs(d_loss.item() - 1.3863) < 1e-4
    assert abs(d_loss.item() - 2 * math.log(2)) < 1e-12
    assert abs(g_loss.item() - math.log(2)) < 1e-12


def test_d_loss_perfect_discriminator_hits_clamp():
    d_loss, _ = adv_from_logits(torch.full((4,), 50.0, dtype=torch.float64),
                                torch.full((4,), -50.0, dtype=torch.float64))
    assert abs(d_loss.item() - (-2 * math.log(1 - PROB_CLAMP))) < 1e-15
    assert d_loss.item() < 1e-6


def test_loss_rec_closed_forms(tiny64):
    nets = clone_bundle(tiny64)
    with torch.no_grad():
        nets.G.out.weight.zero_()
        nets.G.out.bias.zero_()
    batch = random_batch(nets.cfg, seed=2)
    batch.x_target = torch.ones_like(batch.x_target)
    assert loss_rec(nets, batch).item() == 1.0

    batch = random_batch(tiny64.cfg, seed=3)
    with torch.no_grad():
        c = tiny64.S(batch.style_input, batch.target)
        batch.x_target = tiny64.G(batch.x_i, c)
    assert loss_rec(tiny64, batch).item() == 0.0


def test_loss_con_closed_forms(tiny64):
    batch = random_batch(tiny64.cfg, seed=4)
    batch.x_ii = batch.x_i.clone()
    assert loss_con(tiny64, batch).item() == 0.0
    a = torch.zeros(2, 1, 16, dtype=torch.float64)
    assert mse(a, a + 1).item() == 1.0


def test_loss_sty_closed_forms(tiny64):
    nets = clone_bundle(tiny64)
    with torch.no_grad():
        for head in [*nets.S.heads, *nets.M.heads]:
            head.weight.zero_()
            head.bias.zero_()
    batch = random_batch(nets.cfg, seed=9)
    assert loss_sty(nets, batch).item() == 0.0
    with torch.no_grad():
        for head in nets.S.heads:
            head.bias.fill_(2.0)
    assert loss_sty(nets, batch).item() == 2.0


def test_mse_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        mse(torch.zeros(2, 1, 4), torch.zeros(2, 1, 5))


# values on a 0.01 grid, so squared differences never underflow to zero
GRID = st.integers(-500, 500).map(lambda v: v / 100)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 1, 8), elements=GRID), arrays(np.float64, (2, 1, 8), elements=GRID))
def test_mse_nonnegative_zero_iff_equal(a, b):
    v = mse(torch.from_numpy(a), torch.from_numpy(b)).item()
    assert v >= 0
    assert (v == 0) == bool(np.array_equal(a, b))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-30, 30)),
       arrays(np.float64, 4, elements=st.floats(-30, 30)))
def test_adversarial_losses_nonnegative(real, fake):
    d_loss, g_loss = adv_from_logits(torch.from_numpy(real), torch.from_numpy(fake))
    assert d_loss.item() >= 0 and g_loss.item() >= 0


# -- gradients through the tiny networks ---------------------------------------------

def _params(net, k=3):
    return [p for p in net.parameters() if p.requires_grad][:k]


@pytest.mark.parametrize("which", ["adv_d", "adv_g", "rec", "con", "sty"])
def test_loss_gradients_end_to_end(which):
    nets = NetworkBundle(tiny_cfg(seed=3), dtype=torch.float64)
    batch = random_batch(nets.cfg, b=2, seed=10)
    fns = {
        "adv_d": (lambda: loss_adv(nets, batch)[0], list(nets.D.parameters())),
        "adv_g": (lambda: loss_adv(nets, batch)[1],
                  [nets.G.out.weight, nets.G.bottleneck[0].style1.weight]),
        "rec": (lambda: loss_rec(nets, batch), [nets.G.encoder.stem.weight, nets.G.out.weight]),
        "con": (lambda: loss_con(nets, batch), [nets.G.decoder[0].conv1.weight]),
        "sty": (lambda: loss_sty(nets, batch), [nets.M.inp.weight, nets.S.trunk.stem.weight]),
    }
    f, tensors = fns[which]
    assert relative_error(f, tensors) < 1e-3


def test_rec_gradient_wrt_input():
    nets = NetworkBundle(tiny_cfg(seed=4), dtype=torch.float64)
    batch = random_batch(nets.cfg, b=2, seed=11)
    batch.x_i.requires_grad_(True)
    assert relative_error(lambda: loss_rec(nets, batch), [batch.x_i]) < 1e-3


# -- training invariants -------------------------------------------------------------

def test_lambda_scaling():
    k = 3.0
    cfg_a = tiny_cfg(seed=2)
    cfg_b = tiny_cfg(seed=2, lambda_adv=k, lambda_rec=2 * k, lambda_con=k, lambda_sty=k)
    a = NetworkBundle(cfg_a, dtype=torch.float64)
    b = NetworkBundle(cfg_b, dtype=torch.float64)
    batch = random_batch(cfg_a, b=4, seed=12)
    with torch.no_grad():
        fake, ta = generator_side(a, batch, cfg_a)
        ta["g_adv"] = adv_from_logits(a.D(batch.x_target, batch.target),
                                      a.D(fake, batch.target))[1]
        total_a = weighted_total(ta, cfg_a).item()
        total_b = weighted_total(ta, cfg_b).item()
    assert abs(total_b - k * total_a) < 1e-9 * max(1.0, abs(total_b))

    before = a.weights()
    train_step(a, batch, cfg_a)
    train_step(b, batch, cfg_b)
    wa, wb = a.weights(), b.weights()
    for net in ("S", "M", "G", "D"):
        for name in before[net]:
            da = wa[net][name] - before[net][name]
            db = wb[net][name] - before[net][name]
            assert torch.max(torch.abs(da - db)).item() < 1e-5, (net, name)


def test_discriminator_step_decreases_loss():
    nets = NetworkBundle(tiny_cfg(seed=6), dtype=torch.float64)
    batch = random_batch(nets.cfg, b=4, seed=13)
    with torch.no_grad():
        c = nets.S(batch.style_input, batch.target)
        fake = nets.G(batch.x_i, c)

    def d_loss():
        return adv_from_logits(nets.D(batch.x_target, batch.target),
                               nets.D(fake, batch.target))[0]

    start = {n: p.detach().clone() for n, p in nets.D.named_parameters()}
    base = d_loss().item()
    decreased = False
    for lr in (1e-3, 1e-4, 1e-5):
        with torch.no_grad():
            for n, p in nets.D.named_parameters():
                p.copy_(start[n])
        opt = Adam(nets.D.parameters(), lr, 0.0)
        opt.zero_grad()
        d_loss().backward()
        opt.step()
        with torch.no_grad():
            decreased |= d_loss().item() < base
    assert decreased


def test_train_zero_steps(corpus):
    result = train(corpus, tiny_cfg(steps=0))
    assert result.history == []
    fresh = NetworkBundle(tiny_cfg(steps=0))
    for net, params in fresh.weights().items():
        for name, t in params.items():
            assert torch.equal(t, result.best_weights[net][name])


def test_train_bit_identical(corpus):
    cfg = tiny_cfg(steps=6, seed=4)
    a = train(corpus, cfg)
    b = train(corpus, cfg)
    assert len(a.history) == 6
    assert a.history == b.history
    assert a.val_history == b.val_history
    assert set(a.history[0]) == {"step", "d_loss", "g_adv", "l_rec", "l_con", "l_sty"}
    assert all(math.isfinite(v) for row in a.history for v in row.values())


def test_train_rejects_missing_train_split():
    from ecgt2t.errors import EmptyDataset
    with pytest.raises(EmptyDataset):
        train({"train": [], "val": []}, tiny_cfg(steps=1))


def test_train_non_finite_reports_step(corpus):
    cfg = tiny_cfg(steps=3)
    bundle = NetworkBundle(cfg)
    bundle.step = 7
    with torch.no_grad():
        bundle.G.out.bias.fill_(float("nan"))
    with pytest.raises(NonFiniteLoss) as err:
        train(corpus, cfg, resume=bundle)
    assert err.value.step == 8


def test_s2e_training_has_zero_consistency(corpus):
    result = train(corpus, tiny_cfg(steps=2, mode="s2e"))
    assert all(row["l_con"] == 0.0 for row in result.history)


def test_checkpoint_resume_continues(corpus, tmp_path):
    cfg = tiny_cfg(steps=3, seed=5)
    first = train(corpus, cfg)
    path = tmp_path / "ckpt.ecgw"
    first.bundle.save(path)
    loaded = NetworkBundle.load(path)
    assert loaded.step == 3
    for net, params in first.bundle.weights().items():
        for name, t in params.items():
            assert torch.equal(t, loaded.weights()[net][name])
    second = train(corpus, cfg, resume=loaded)
    assert [row["step"] for row in second.history] == [4, 5, 6]


def test_load_missing_checkpoint(tmp_path):
    with pytest.raises(UntrainedModel):
        NetworkBundle.load(tmp_path / "none.ecgw")


# -- synthesis -------------------------------------------------------------------------

def test_synthesize_twelve(tiny64, pair):
    out = synthesize_twelve(pair, tiny64)
    assert set(out.leads) == set(LeadId)
    np.testing.assert_array_equal(out.lead(LeadId.I), pair.lead_i)
    np.testing.assert_array_equal(out.lead(LeadId.II), pair.lead_ii)
    for lead in LeadId:
        assert out.lead(lead).size == 16
        assert np.all(np.isfinite(out.lead(lead)))


def test_synthesize_from_one(pair):
    nets = NetworkBundle(tiny_cfg(mode="s2e"), dtype=torch.float64)
    a = synthesize_from_one(pair.lead_i, nets)
    b = synthesize_from_one(pair.lead_i, nets)
    assert set(a.leads) == set(LeadId)
    np.testing.assert_array_equal(a.lead(LeadId.I), pair.lead_i)
    for lead in LeadId:
        np.testing.assert_array_equal(a.lead(lead), b.lead(lead))
    assert not np.array_equal(a.lead(LeadId.II), pair.lead_i)


def test_mode_mismatch(tiny64, pair):
    with pytest.raises(ModeMismatch):
        synthesize_from_one(pair.lead_i, tiny64)
    s2e = NetworkBundle(tiny_cfg(mode="s2e"))
    with pytest.raises(ModeMismatch):
        synthesize_twelve(pair, s2e)
    with pytest.raises(UntrainedModel):
        synthesize_twelve(pair, None)


def test_load_for_inference_roundtrip(tiny64, pair, tmp_path):
    path = tmp_path / "m.ecgw"
    nets32 = NetworkBundle(tiny_cfg())
    nets32.save(path)
    loaded = load_for_inference(path)
    a = synthesize_twelve(pair, nets32)
    b = synthesize_twelve(pair, loaded)
    for lead in LeadId:
        np.testing.assert_array_equal(a.lead(lead), b.lead(lead))


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        TrainConfig(lambda_rec=-1)
    with pytest.raises(ValueError):
        TrainConfig(lr_g=0)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"learning_rate": 1})
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()
