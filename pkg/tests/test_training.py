import hashlib
import math
import random

import numpy as np
import pytest
import torch

from phonotope.config import EncoderConfig, NoiseConfig, TrainConfig
from phonotope.corpus import Triplet
from phonotope.encoder import init_params
from phonotope.scriptkit import ScriptId, preprocess
from phonotope.training import (
    EncodedName,
    apply_noise,
    distill_loss,
    language_dropout,
    lr_schedule,
    teacher_targets,
    train_phase1,
    train_phase2,
    train_phase3,
    triplet_loss,
)
from phonotope.vocab import LangTable, build_vocab


# -- loss oracles ---------------------------------------------------------------

def scalar_triplet_loss(a, p, n, m):
    d_pos = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, p)))
    d_neg = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, n)))
    return max(0.0, d_pos - d_neg + m)


def scalar_distill_loss(s, t, alpha):
    mse = sum((x - y) ** 2 for x, y in zip(s, t)) / len(s)
    cos = sum(x * y for x, y in zip(s, t))
    return alpha * mse + (1 - alpha) * (1 - cos)


def _unit(rng):
    v = rng.standard_normal(128)
    return v / np.linalg.norm(v)


def test_triplet_loss_examples():
    e = torch.zeros(128, dtype=torch.float64); e[0] = 1.0
    assert triplet_loss(e, e, -e, 0.3).item() == 0.0
    assert triplet_loss(e, e, e, 0.3).item() == pytest.approx(0.3, abs=1e-15)


def test_distill_loss_examples():
    e = torch.zeros(128, dtype=torch.float64); e[5] = 1.0
    assert distill_loss(e, e, 0.5).item() == 0.0
    assert distill_loss(-e, e, 0.5).item() == 1.015625  # exact in binary fp


def test_losses_match_scalar_oracle_100_cases():
    rng = np.random.default_rng(42)
    for _ in range(100):
        a, p, n = _unit(rng), _unit(rng), _unit(rng)
        m = float(rng.uniform(0.05, 0.5))
        alpha = float(rng.uniform(0.0, 1.0))
        got = triplet_loss(torch.as_tensor(a), torch.as_tensor(p),
                           torch.as_tensor(n), m).item()
        assert abs(got - scalar_triplet_loss(a, p, n, m)) < 1e-12
        got = distill_loss(torch.as_tensor(a), torch.as_tensor(p), alpha).item()
        assert abs(got - scalar_distill_loss(a, p, alpha)) < 1e-12


def test_triplet_loss_nonnegative_and_margin_zeroing():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, p, n = _unit(rng), _unit(rng), _unit(rng)
        val = triplet_loss(torch.as_tensor(a), torch.as_tensor(p),
                           torch.as_tensor(n), 0.2).item()
        assert val >= 0.0
        d_pos = np.linalg.norm(a - p)
        d_neg = np.linalg.norm(a - n)
        if d_neg >= d_pos + 0.2:
            assert val == 0.0


def test_distill_zero_iff_equal():
    rng = np.random.default_rng(8)
    a = _unit(rng)
    same = distill_loss(torch.as_tensor(a), torch.as_tensor(a), 0.5).item()
    assert abs(same) < 1e-15  # exactly 0 up to unit-norm roundoff
    b = _unit(rng)
    assert distill_loss(torch.as_tensor(a), torch.as_tensor(b), 0.5).item() > 1e-6


# -- schedule ---------------------------------------------------------------------

def test_lr_schedule_endpoints_and_midpoint():
    assert lr_schedule(0, 100, 1e-3) == 1e-3
    assert lr_schedule(100, 100, 1e-3) == pytest.approx(0.0, abs=1e-18)
    assert lr_schedule(50, 100, 1e-3) == pytest.approx(5e-4)


def test_lr_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        lr_schedule(0, 0, 1e-3)
    with pytest.raises(ValueError):
        lr_schedule(5, 4, 1e-3)


# -- gradient check (width-8 config, both losses) -----------------------------------

def fd_gradient(loss_fn, param: torch.nn.Parameter, h: float = 1e-6):
    grad = torch.zeros_like(param)
    flat = param.data.view(-1)
    gflat = grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def _width8_config(vocab_size=32, n_langs=3):
    return EncoderConfig(trunk_hidden=8, attn_heads=2, pool_hidden=8,
                         char_dim=8, script_dim=4, lang_dim=4,
                         vocab_size=vocab_size, n_langs=n_langs)


def assert_grads_match(module, loss_fn, atol: float = 1e-7):
    loss = loss_fn()
    assert loss.item() > 1e-3  # away from the hinge's flat region
    module.zero_grad()
    loss.backward()
    for name, param in sorted(module.named_parameters()):
        analytic = param.grad.detach().clone()
        numeric = fd_gradient(lambda: loss_fn().detach(), param)
        scale = max(analytic.norm().item(), numeric.norm().item())
        diff = (analytic - numeric).norm().item()
        if scale < atol:
            # both sides agree the gradient vanishes (e.g. softmax shift
            # invariance in pooling biases at small init)
            assert diff < atol, f"{name}: zero-gradient mismatch {diff:.2e}"
            continue
        rel = diff / scale
        assert rel < 1e-4, f"{name}: relative error {rel:.2e}"


@pytest.mark.slow
def test_gradcheck_triplet_through_teacher():
    torch.manual_seed(0)
    params = init_params(_width8_config(), seed=3)
    teacher = params.teacher.double()
    rng = np.random.default_rng(1)
    seqs = [torch.as_tensor(rng.integers(0, 2, (t, 24)).astype(np.float64))
            for t in (3, 4, 2)]
    lengths = torch.tensor([3, 4, 2])
    batch = torch.zeros(3, 4, 24, dtype=torch.float64)
    for i, s in enumerate(seqs):
        batch[i, :len(s)] = s

    def loss_fn():
        e = teacher(batch, lengths)
        return triplet_loss(e[0], e[1], e[2], 0.3)

    assert_grads_match(teacher, loss_fn)


@pytest.mark.slow
def test_gradcheck_distill_through_student():
    torch.manual_seed(0)
    params = init_params(_width8_config(), seed=4)
    student = params.student.double()
    rng = np.random.default_rng(2)
    chars = torch.tensor([[2, 5, 7, 3]], dtype=torch.int64)
    scripts = torch.tensor([0], dtype=torch.int64)
    langs = torch.tensor([1], dtype=torch.int64)
    lengths = torch.tensor([4])
    target = torch.as_tensor(_unit(rng))

    def loss_fn():
        e = student(chars, scripts, langs, lengths)
        return distill_loss(e[0], target, 0.5)

    assert_grads_match(student, loss_fn)


# -- augmentation -----------------------------------------------------------------

@pytest.fixture(scope="module")
def noise_vocab():
    return build_vocab(["banorel", "Москва", "서울"], expand=False)


def test_noise_not_applied_leaves_input(noise_vocab):
    ts = preprocess("banorel")

    class NeverFire(random.Random):
        def random(self):
            return 0.999

    out, events = apply_noise(ts, NeverFire(), NoiseConfig(), noise_vocab)
    assert out.tokens == ts.tokens
    assert not events.applied


def test_noise_deletion_never_empties(noise_vocab):
    cfg = NoiseConfig(apply_prob=1.0, insert_prob=0.0, delete_prob=1.0,
                      substitute_prob=0.0, transpose_prob=0.0)
    ts = preprocess("b")
    rng = random.Random(1)
    for _ in range(50):
        out, events = apply_noise(ts, rng, cfg, noise_vocab)
        assert events.deleted
        assert len(out) == 1


def test_noise_preserves_script_partitions(noise_vocab):
    cfg = NoiseConfig(apply_prob=1.0, insert_prob=1.0, delete_prob=1.0,
                      substitute_prob=1.0, transpose_prob=1.0)
    rng = random.Random(3)
    for name in ("banorel", "Москва", "서울"):
        ts = preprocess(name)
        scripts = set(ts.scripts())
        for _ in range(200):
            out, _ = apply_noise(ts, rng, cfg, noise_vocab)
            assert len(out) >= 1
            assert set(out.scripts()) <= scripts


def test_noise_rates_calibrated(noise_vocab):
    cfg = NoiseConfig()
    rng = random.Random(99)
    ts = preprocess("banorel")
    n = 20_000
    counts = {"applied": 0, "inserted": 0, "deleted": 0,
              "substituted": 0, "transposed": 0}
    for _ in range(n):
        _, ev = apply_noise(ts, rng, cfg, noise_vocab)
        for key in counts:
            counts[key] += getattr(ev, key)
    assert abs(counts["applied"] / n - 0.3) < 0.01
    applied = counts["applied"]
    assert abs(counts["inserted"] / applied - 0.1) < 0.01
    assert abs(counts["deleted"] / applied - 0.1) < 0.01
    assert abs(counts["substituted"] / applied - 0.05) < 0.01
    assert abs(counts["transposed"] / applied - 0.05) < 0.01


def test_language_dropout_rates():
    rng = random.Random(5)
    assert language_dropout("en", rng, p=0.0) == "en"
    assert language_dropout("en", rng, p=1.0) is None
    assert language_dropout(None, rng, p=0.0) is None
    hits = sum(language_dropout("en", rng, p=0.5) is None
               for _ in range(20_000))
    assert abs(hits / 20_000 - 0.5) < 0.01


# -- phase smoke tests ---------------------------------------------------------------

def _encoded_toy():
    vocab = build_vocab(["banorel", "bamel", "duko"], expand=False)
    langs = LangTable(["eo"])
    rng = np.random.default_rng(0)
    encoded = {}
    for i, name in enumerate(("banorel", "bamel", "duko")):
        encoded[i] = EncodedName(
            i, preprocess(name), ScriptId.LATIN, "eo",
            rng.integers(0, 2, (len(name), 24)).astype(np.uint8))
    return vocab, langs, encoded


def test_phase1_single_triplet_overfits():
    vocab, langs, encoded = _encoded_toy()
    cfg = TrainConfig.phase1(epochs=200, batch_size=1, seed=3,
                             val_frac=0.0)
    params = init_params(_width8_config(len(vocab), len(langs)), seed=5)
    triplets = [Triplet(0, 1, 2, "random")]
    result = train_phase1(params.teacher, triplets, encoded, cfg)
    assert result.logs[-1].train_loss < 1e-4  # loss -> 0 within 200 steps


def test_phase1_empty_after_filtering_raises():
    vocab, langs, encoded = _encoded_toy()
    for e in encoded.values():
        e.features = None
    with pytest.raises(ValueError, match="phonetic features"):
        train_phase1(init_params(_width8_config(), seed=1).teacher,
                     [Triplet(0, 1, 2, "random")], encoded,
                     TrainConfig.phase1(epochs=1))


def test_phase1_fixed_seed_reproduces_loss_trajectory():
    vocab, langs, encoded = _encoded_toy()
    triplets = [Triplet(0, 1, 2, "random"), Triplet(1, 0, 2, "random")]
    cfg = TrainConfig.phase1(epochs=3, batch_size=2, seed=11)
    r1 = train_phase1(init_params(_width8_config(), seed=5).teacher,
                      triplets, encoded, cfg)
    r2 = train_phase1(init_params(_width8_config(), seed=5).teacher,
                      triplets, encoded, cfg)
    assert [(l.train_loss, l.val_loss) for l in r1.logs] == \
        [(l.train_loss, l.val_loss) for l in r2.logs]


def _param_hash(module):
    h = hashlib.sha256()
    for name, p in sorted(module.named_parameters()):
        h.update(p.detach().numpy().astype("<f4").tobytes())
    return h.hexdigest()


def test_phase2_overfit_and_teacher_frozen():
    vocab, langs, encoded = _encoded_toy()
    enc_cfg = _width8_config(len(vocab), len(langs))
    params = init_params(enc_cfg, seed=6)
    teacher_hash = _param_hash(params.teacher)
    samples = [encoded[0]]
    targets = teacher_targets(params.teacher, encoded, [0])
    cfg = TrainConfig.phase2(epochs=400, batch_size=1, seed=3, val_frac=0.0,
                             base_lr=3e-3, noise_enabled=False,
                             lang_dropout=0.0)
    result = train_phase2(params.student, samples, targets, vocab, langs, cfg)
    assert _param_hash(params.teacher) == teacher_hash
    # distill loss < 0.01 on the overfit sample implies cosine > 0.98
    assert result.logs[-1].train_loss < 0.01


def test_phase2_target_rows_are_clean_teacher_embeddings():
    vocab, langs, encoded = _encoded_toy()
    params = init_params(_width8_config(len(vocab), len(langs)), seed=6)
    ids = [0, 1, 2]
    targets = teacher_targets(params.teacher, encoded, ids)
    from phonotope.encoder import teacher_forward
    for row, ident in zip(targets, ids):
        clean = teacher_forward(params.teacher,
                                encoded[ident].features.astype(np.float32))
        assert np.abs(row - clean).max() < 1e-6


def test_phase3_runs_and_improves():
    vocab, langs, encoded = _encoded_toy()
    params = init_params(_width8_config(len(vocab), len(langs)), seed=8)
    triplets = [Triplet(0, 1, 2, "hard"), Triplet(1, 0, 2, "hard")]
    cfg = TrainConfig.phase3(epochs=30, batch_size=2, seed=4, val_frac=0.0,
                             base_lr=1e-3)
    result = train_phase3(params.student, triplets, encoded, vocab, langs, cfg)
    assert result.logs[-1].train_loss < result.logs[0].train_loss


def test_phase3_lr_starts_at_configured_value():
    cfg = TrainConfig.phase3()
    assert cfg.base_lr == 1e-4
    assert lr_schedule(0, 100, cfg.base_lr) == 1e-4
    assert TrainConfig.phase3_conservative().base_lr == 1e-5
