"""Losses, augmentation, schedules and the three-phase curriculum.

Phase 1 trains the Teacher on feature-sequence triplets with margin loss.
Phase 2 distils the frozen Teacher into the Student: the Student sees
noised characters with language dropout while the target is always the
Teacher's embedding of the clean input. Phase 3 fine-tunes the Student on
hard-negative triplets at a reduced learning rate, characters only.

All sampling is driven by seeds derived from the phase config, so a fixed
seed reproduces the loss trajectory and the checkpoint bytes exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from .config import NoiseConfig, TrainConfig
from .corpus import ToponymStore, Triplet
from .phonetics import FeatureTable, G2pProvider, PhoneticsError
from .scriptkit import ScriptId, TokenSeq, preprocess
from .vocab import LangTable, Vocabulary
from .encoder import StudentEncoder, TeacherEncoder, save_checkpoint


# ---------------------------------------------------------------------------
# Losses

def triplet_loss(e_a: torch.Tensor, e_p: torch.Tensor, e_n: torch.Tensor,
                 margin: float) -> torch.Tensor:
    """max(0, ||a-p|| - ||a-n|| + margin), elementwise over leading dims."""
    d_pos = (e_a - e_p).norm(dim=-1)
    d_neg = (e_a - e_n).norm(dim=-1)
    return torch.clamp(d_pos - d_neg + margin, min=0.0)


def distill_loss(e_s: torch.Tensor, e_t: torch.Tensor,
                 alpha: float) -> torch.Tensor:
    """alpha * MSE + (1 - alpha) * (1 - cosine), per sample."""
    mse = ((e_s - e_t) ** 2).mean(dim=-1)
    cos = (e_s * e_t).sum(dim=-1)
    return alpha * mse + (1.0 - alpha) * (1.0 - cos)


def lr_schedule(step: int, total: int, base: float) -> float:
    """Cosine annealing from base to 0 over ``total`` steps."""
    if total <= 0:
        raise ValueError("total steps must be positive")
    if not 0 <= step <= total:
        raise ValueError("step outside [0, total]")
    return base * (1.0 + math.cos(math.pi * step / total)) / 2.0


# ---------------------------------------------------------------------------
# Augmentation

@dataclass
class NoiseEvents:
    applied: bool = False
    inserted: bool = False
    deleted: bool = False
    substituted: bool = False
    transposed: bool = False


def apply_noise(ts: TokenSeq, rng: random.Random, cfg: NoiseConfig,
                vocab: Vocabulary) -> tuple[TokenSeq, NoiseEvents]:
    """Character noise in fixed order: insert, delete, substitute, transpose.

    Each operation is an independent Bernoulli event once the noise branch
    is entered. Inserted and substituted tokens are drawn from the
    vocabulary partition of the affected position's script, so noise never
    crosses script boundaries; deletion is skipped at length 1 so the
    sequence never empties.
    """
    if len(ts) == 0:
        raise ValueError("empty token sequence")
    events = NoiseEvents()
    if rng.random() >= cfg.apply_prob:
        return ts, events
    events.applied = True
    tokens = list(ts.tokens)

    if rng.random() < cfg.insert_prob:
        events.inserted = True
        pos = rng.randrange(len(tokens) + 1)
        script = tokens[min(pos, len(tokens) - 1)][1]
        pool = vocab.tokens_for_script(script)
        if pool:
            tokens.insert(pos, (pool[rng.randrange(len(pool))], script))

    if rng.random() < cfg.delete_prob:
        events.deleted = True
        if len(tokens) > 1:
            del tokens[rng.randrange(len(tokens))]

    if rng.random() < cfg.substitute_prob:
        events.substituted = True
        pos = rng.randrange(len(tokens))
        script = tokens[pos][1]
        pool = vocab.tokens_for_script(script)
        if pool:
            tokens[pos] = (pool[rng.randrange(len(pool))], script)

    if rng.random() < cfg.transpose_prob:
        events.transposed = True
        if len(tokens) >= 2:
            pos = rng.randrange(len(tokens) - 1)
            tokens[pos], tokens[pos + 1] = tokens[pos + 1], tokens[pos]

    return TokenSeq(tokens=tuple(tokens), source=ts.source), events


def language_dropout(lang: str | None, rng: random.Random,
                     p: float = 0.5) -> str | None:
    """Replace a known language with UNK (None) with probability p."""
    if lang is None:
        return None
    return None if rng.random() < p else lang


# ---------------------------------------------------------------------------
# Sample preparation

@dataclass
class EncodedName:
    """A toponym ready for either encoder."""

    toponym_id: int
    ts: TokenSeq
    script: ScriptId
    lang: str | None
    features: np.ndarray | None  # (T, 24) uint8, None when not transcribable


def encode_store(store: ToponymStore, provider: G2pProvider,
                 ftable: FeatureTable) -> dict[int, EncodedName]:
    """Preprocess every toponym and attach features where available."""
    out: dict[int, EncodedName] = {}
    for rec in store:
        ts = preprocess(rec.name)
        feats: np.ndarray | None = None
        ipa = provider.transcribe(rec.name, rec.lang, rec.id)
        if ipa:
            try:
                feats = ftable.features(ipa)
            except PhoneticsError:
                feats = None
        out[rec.id] = EncodedName(rec.id, ts, rec.script, rec.lang, feats)
    return out


@dataclass
class SurvivalStats:
    generated: int = 0
    survived: int = 0

    @property
    def rate(self) -> float:
        return self.survived / self.generated if self.generated else 0.0


def filter_feature_triplets(triplets: list[Triplet],
                            encoded: dict[int, EncodedName],
                            ) -> tuple[list[Triplet], SurvivalStats]:
    """Keep triplets whose three members all have articulatory features.

    With independent per-toponym feature availability p the survival rate
    is approximately p^3, which is the sanity check used on the synthetic
    corpus tests.
    """
    stats = SurvivalStats(generated=len(triplets))
    kept = [t for t in triplets
            if all(encoded[i].features is not None
                   for i in (t.anchor_id, t.positive_id, t.negative_id))]
    stats.survived = len(kept)
    return kept, stats


def _feature_batch(seqs: list[np.ndarray]) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(s) for s in seqs], dtype=torch.int64)
    t_max = int(lengths.max())
    batch = torch.zeros(len(seqs), t_max, seqs[0].shape[1])
    for i, s in enumerate(seqs):
        batch[i, :len(s)] = torch.as_tensor(s, dtype=torch.float32)
    return batch, lengths


def _token_batch(samples: list[tuple[list[int], int, int]]
                 ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(ids) for ids, _, _ in samples],
                           dtype=torch.int64)
    t_max = int(lengths.max())
    chars = torch.zeros(len(samples), t_max, dtype=torch.int64)  # 0 = PAD
    scripts = torch.tensor([s for _, s, _ in samples], dtype=torch.int64)
    langs = torch.tensor([l for _, _, l in samples], dtype=torch.int64)
    for i, (ids, _, _) in enumerate(samples):
        chars[i, :len(ids)] = torch.tensor(ids, dtype=torch.int64)
    return chars, scripts, langs, lengths


# ---------------------------------------------------------------------------
# Shared training loop machinery

@dataclass
class EpochLog:
    phase: int
    epoch: int
    train_loss: float
    val_loss: float
    val_sim: float | None
    lr: float

    def as_tsv(self) -> str:
        sim = f"{self.val_sim:.6f}" if self.val_sim is not None else ""
        return (f"{self.phase}\t{self.epoch}\t{self.train_loss:.6f}\t"
                f"{self.val_loss:.6f}\t{sim}\t{self.lr:.8f}")


@dataclass
class TrainResult:
    logs: list[EpochLog] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    best_val_sim: float | None = None
    checkpoint_path: str | None = None


def _make_optimizer(module: torch.nn.Module, cfg: TrainConfig):
    decay, no_decay = [], []
    for name, param in sorted(module.named_parameters()):
        if param.dim() >= 2 and "emb" not in name:
            decay.append(param)
        else:
            no_decay.append(param)
    return torch.optim.AdamW(
        [{"params": decay, "weight_decay": cfg.weight_decay},
         {"params": no_decay, "weight_decay": 0.0}],
        lr=cfg.base_lr)


def _split(n: int, val_frac: float, seed: int) -> tuple[list[int], list[int]]:
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_val = max(1, int(round(n * val_frac))) if n > 1 else 0
    return order[n_val:], order[:n_val]


def _set_lr(optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


# ---------------------------------------------------------------------------
# Phase 1: Teacher on feature triplets

def train_phase1(teacher: TeacherEncoder,
                 triplets: list[Triplet],
                 encoded: dict[int, EncodedName],
                 cfg: TrainConfig,
                 ckpt_path=None,
                 ckpt_extra: dict | None = None) -> TrainResult:
    usable, _ = filter_feature_triplets(triplets, encoded)
    if not usable:
        raise ValueError("no triplets with complete phonetic features")
    torch.manual_seed(cfg.seed)
    torch.set_num_threads(cfg.threads)
    train_idx, val_idx = _split(len(usable), cfg.val_frac, cfg.seed)
    optimizer = _make_optimizer(teacher, cfg)
    steps_per_epoch = max(1, math.ceil(len(train_idx) / cfg.batch_size))
    total_steps = cfg.epochs * steps_per_epoch
    result = TrainResult()
    step = 0

    def run_batch(indices: list[int], train: bool) -> float:
        seqs = []
        for i in indices:
            t = usable[i]
            for ident in (t.anchor_id, t.positive_id, t.negative_id):
                seqs.append(encoded[ident].features)
        batch, lengths = _feature_batch(seqs)
        emb = teacher(batch, lengths)
        e = emb.view(len(indices), 3, -1)
        loss = triplet_loss(e[:, 0], e[:, 1], e[:, 2], cfg.margin).mean()
        if train:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        return float(loss.detach())

    for epoch in range(1, cfg.epochs + 1):
        order = list(train_idx)
        random.Random(cfg.seed * 1009 + epoch).shuffle(order)
        teacher.train()
        train_losses = []
        for start in range(0, len(order), cfg.batch_size):
            lr = lr_schedule(step, total_steps, cfg.base_lr)
            _set_lr(optimizer, lr)
            train_losses.append(run_batch(order[start:start + cfg.batch_size],
                                          train=True))
            step += 1
        teacher.eval()
        with torch.no_grad():
            val_losses = [run_batch(val_idx[s:s + cfg.batch_size], train=False)
                          for s in range(0, len(val_idx), cfg.batch_size)]
        log = EpochLog(cfg.phase, epoch,
                       float(np.mean(train_losses)) if train_losses else 0.0,
                       float(np.mean(val_losses)) if val_losses else 0.0,
                       None, lr_schedule(step, total_steps, cfg.base_lr))
        result.logs.append(log)
        if log.val_loss < result.best_val_loss:
            result.best_val_loss = log.val_loss
            result.best_epoch = epoch
            if ckpt_path is not None:
                extra = ckpt_extra or {}
                save_checkpoint(ckpt_path, teacher, teacher.config,
                                role="teacher", seed=cfg.seed, phase=1,
                                epoch=epoch, val_loss=log.val_loss, **extra)
                result.checkpoint_path = str(ckpt_path)
    return result


# ---------------------------------------------------------------------------
# Phase 2: Student-Teacher alignment

def teacher_targets(teacher: TeacherEncoder, encoded: dict[int, EncodedName],
                    ids: list[int], batch_size: int = 256) -> np.ndarray:
    """Frozen-Teacher embeddings of the clean inputs, in ``ids`` order."""
    teacher.eval()
    out = np.zeros((len(ids), teacher.config.embed_dim), dtype=np.float32)
    with torch.no_grad():
        for start in range(0, len(ids), batch_size):
            chunk = ids[start:start + batch_size]
            batch, lengths = _feature_batch(
                [encoded[i].features for i in chunk])
            out[start:start + len(chunk)] = teacher(batch, lengths).numpy()
    return out


def train_phase2(student: StudentEncoder,
                 samples: list[EncodedName],
                 targets: np.ndarray,
                 vocab: Vocabulary,
                 langs: LangTable,
                 cfg: TrainConfig,
                 ckpt_path=None,
                 ckpt_extra: dict | None = None) -> TrainResult:
    """Distil precomputed clean-input Teacher targets into the Student.

    The Student input may be noised; the target row never changes, which
    is exactly the clean-target invariance the curriculum requires.
    """
    if len(samples) != len(targets):
        raise ValueError("samples/targets length mismatch")
    if not samples:
        raise ValueError("no distillation samples")
    torch.manual_seed(cfg.seed)
    torch.set_num_threads(cfg.threads)
    train_idx, val_idx = _split(len(samples), cfg.val_frac, cfg.seed)
    optimizer = _make_optimizer(student, cfg)
    steps_per_epoch = max(1, math.ceil(len(train_idx) / cfg.batch_size))
    total_steps = cfg.epochs * steps_per_epoch
    target_t = torch.from_numpy(targets)
    result = TrainResult()
    step = 0

    def encode_one(sample: EncodedName, rng: random.Random | None
                   ) -> tuple[list[int], int, int]:
        ts, lang = sample.ts, sample.lang
        if rng is not None:
            if cfg.noise_enabled:
                ts, _ = apply_noise(ts, rng, cfg.noise, vocab)
            lang = language_dropout(lang, rng, cfg.lang_dropout)
        return vocab.encode(ts), int(sample.script), langs.lookup(lang)

    def run_batch(indices: list[int], rng: random.Random | None,
                  train: bool) -> tuple[float, float]:
        rows = [encode_one(samples[i], rng) for i in indices]
        chars, scripts, langs_t, lengths = _token_batch(rows)
        emb = student(chars, scripts, langs_t, lengths)
        target = target_t[indices]
        loss = distill_loss(emb, target, cfg.alpha).mean()
        sim = float((emb * target).sum(dim=-1).mean().detach())
        if train:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        return float(loss.detach()), sim

    for epoch in range(1, cfg.epochs + 1):
        rng = random.Random(cfg.seed * 2003 + epoch)
        order = list(train_idx)
        random.Random(cfg.seed * 1009 + epoch).shuffle(order)
        student.train()
        train_losses = []
        for start in range(0, len(order), cfg.batch_size):
            lr = lr_schedule(step, total_steps, cfg.base_lr)
            _set_lr(optimizer, lr)
            loss, _ = run_batch(order[start:start + cfg.batch_size], rng, True)
            train_losses.append(loss)
            step += 1
        student.eval()
        val_losses, val_sims = [], []
        with torch.no_grad():
            for start in range(0, len(val_idx), cfg.batch_size):
                loss, sim = run_batch(val_idx[start:start + cfg.batch_size],
                                      None, False)
                val_losses.append(loss)
                val_sims.append(sim)
        log = EpochLog(cfg.phase, epoch,
                       float(np.mean(train_losses)) if train_losses else 0.0,
                       float(np.mean(val_losses)) if val_losses else 0.0,
                       float(np.mean(val_sims)) if val_sims else None,
                       lr_schedule(step, total_steps, cfg.base_lr))
        result.logs.append(log)
        if log.val_loss < result.best_val_loss:
            result.best_val_loss = log.val_loss
            result.best_epoch = epoch
            result.best_val_sim = log.val_sim
            if ckpt_path is not None:
                extra = ckpt_extra or {}
                save_checkpoint(ckpt_path, student, student.config,
                                role="student", seed=cfg.seed, phase=2,
                                epoch=epoch, val_loss=log.val_loss,
                                val_sim=log.val_sim, **extra)
                result.checkpoint_path = str(ckpt_path)
    return result


# ---------------------------------------------------------------------------
# Phase 3: Student hard-negative fine-tuning (characters only)

def train_phase3(student: StudentEncoder,
                 triplets: list[Triplet],
                 encoded: dict[int, EncodedName],
                 vocab: Vocabulary,
                 langs: LangTable,
                 cfg: TrainConfig,
                 ckpt_path=None,
                 ckpt_extra: dict | None = None) -> TrainResult:
    if not triplets:
        raise ValueError("no fine-tuning triplets")
    torch.manual_seed(cfg.seed)
    torch.set_num_threads(cfg.threads)
    train_idx, val_idx = _split(len(triplets), cfg.val_frac, cfg.seed)
    optimizer = _make_optimizer(student, cfg)
    steps_per_epoch = max(1, math.ceil(len(train_idx) / cfg.batch_size))
    total_steps = cfg.epochs * steps_per_epoch
    result = TrainResult()
    step = 0

    def run_batch(indices: list[int], rng: random.Random | None,
                  train: bool) -> float:
        rows = []
        for i in indices:
            t = triplets[i]
            for ident in (t.anchor_id, t.positive_id, t.negative_id):
                s = encoded[ident]
                ts, lang = s.ts, s.lang
                if rng is not None:
                    if cfg.noise_enabled:
                        ts, _ = apply_noise(ts, rng, cfg.noise, vocab)
                    lang = language_dropout(lang, rng, cfg.lang_dropout)
                rows.append((vocab.encode(ts), int(s.script),
                             langs.lookup(lang)))
        chars, scripts, langs_t, lengths = _token_batch(rows)
        emb = student(chars, scripts, langs_t, lengths)
        e = emb.view(len(indices), 3, -1)
        loss = triplet_loss(e[:, 0], e[:, 1], e[:, 2], cfg.margin).mean()
        if train:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        return float(loss.detach())

    for epoch in range(1, cfg.epochs + 1):
        rng = random.Random(cfg.seed * 2003 + epoch)
        order = list(train_idx)
        random.Random(cfg.seed * 1009 + epoch).shuffle(order)
        student.train()
        train_losses = []
        for start in range(0, len(order), cfg.batch_size):
            lr = lr_schedule(step, total_steps, cfg.base_lr)
            _set_lr(optimizer, lr)
            train_losses.append(
                run_batch(order[start:start + cfg.batch_size], rng, True))
            step += 1
        student.eval()
        with torch.no_grad():
            val_losses = [run_batch(val_idx[s:s + cfg.batch_size], None, False)
                          for s in range(0, len(val_idx), cfg.batch_size)]
        log = EpochLog(cfg.phase, epoch,
                       float(np.mean(train_losses)) if train_losses else 0.0,
                       float(np.mean(val_losses)) if val_losses else 0.0,
                       None, lr_schedule(step, total_steps, cfg.base_lr))
        result.logs.append(log)
        if log.val_loss < result.best_val_loss:
            result.best_val_loss = log.val_loss
            result.best_epoch = epoch
            if ckpt_path is not None:
                extra = ckpt_extra or {}
                save_checkpoint(ckpt_path, student, student.config,
                                role="student", seed=cfg.seed, phase=3,
                                epoch=epoch, val_loss=log.val_loss, **extra)
                result.checkpoint_path = str(ckpt_path)
    return result


def write_train_log(path, logs: list[EpochLog]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.as_tsv() + "\n")
