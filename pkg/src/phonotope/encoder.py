"""Teacher and Student encoders sharing one trunk architecture.

The Teacher consumes per-phoneme articulatory feature vectors, the Student
consumes character/script/language embeddings; both run the same trunk
(BiLSTM, multi-head self-attention, additive attention pooling, linear
projection) and emit L2-normalised 128-dimensional embeddings. Padding is
masked everywhere so padded and unpadded encodings of the same input agree.

Checkpoints use a versioned header plus raw little-endian float32 tensors
in manifest order, which keeps hashes stable across torch versions.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .config import CODE_VERSION, EncoderConfig
from .scriptkit import ScriptId, TokenSeq
from .vocab import LangTable, Vocabulary

_CKPT_MAGIC = b"PHONOCKPT v1\n"


def _masked_softmax(scores: torch.Tensor, mask: torch.Tensor,
                    dim: int = -1) -> torch.Tensor:
    scores = scores.masked_fill(~mask, float("-inf"))
    return torch.softmax(scores, dim=dim)


class SelfAttention(nn.Module):
    """Plain multi-head self-attention with key padding masking."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads != 0:
            raise ValueError(f"width {width} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = width // heads
        self.qkv = nn.Linear(width, 3 * width)
        self.out = nn.Linear(width, width)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, t, w = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)

        def split(m: torch.Tensor) -> torch.Tensor:
            return m.view(b, t, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = split(q), split(k), split(v)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        key_mask = mask[:, None, None, :]  # (b, 1, 1, t)
        attn = _masked_softmax(scores, key_mask)
        mixed = (attn @ v).transpose(1, 2).reshape(b, t, w)
        return self.out(mixed)


class AttentionPooling(nn.Module):
    """Additive attention: softmax(v . tanh(W h + b)) weighted sum."""

    def __init__(self, width: int, hidden: int):
        super().__init__()
        self.proj = nn.Linear(width, hidden)
        self.score = nn.Linear(hidden, 1, bias=False)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        scores = self.score(torch.tanh(self.proj(x))).squeeze(-1)  # (b, t)
        weights = _masked_softmax(scores, mask)
        return (weights.unsqueeze(-1) * x).sum(dim=1)


class Trunk(nn.Module):
    """BiLSTM -> self-attention -> attention pooling -> projection -> L2."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        width = 2 * config.trunk_hidden
        self.lstm = nn.LSTM(config.trunk_in, config.trunk_hidden,
                            batch_first=True, bidirectional=True)
        self.attn = SelfAttention(width, config.attn_heads)
        self.pool = AttentionPooling(width, config.pool_hidden)
        self.project = nn.Linear(width, config.embed_dim)

    def forward(self, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True,
                                      enforce_sorted=False)
        out, _ = self.lstm(packed)
        h, _ = pad_packed_sequence(out, batch_first=True,
                                   total_length=x.shape[1])
        t = x.shape[1]
        mask = torch.arange(t, device=x.device)[None, :] < lengths[:, None]
        h = self.attn(h, mask)
        pooled = self.pool(h, mask)
        e = self.project(pooled)
        return e / e.norm(dim=-1, keepdim=True)


class TeacherEncoder(nn.Module):
    """Articulatory-feature pathway: 24-d binary vectors in, embedding out."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.feature_proj = nn.Linear(config.feature_dim, config.trunk_in)
        self.trunk = Trunk(config)
        self.truncated = 0

    def forward(self, features: torch.Tensor,
                lengths: torch.Tensor) -> torch.Tensor:
        """features: (batch, T, 24) float; lengths: (batch,) int64."""
        if features.shape[1] == 0:
            raise ValueError("empty feature sequence")
        if features.shape[1] > self.config.max_len:
            self.truncated += 1
            features = features[:, :self.config.max_len]
            lengths = lengths.clamp(max=self.config.max_len)
        return self.trunk(self.feature_proj(features), lengths)


class StudentEncoder(nn.Module):
    """Character pathway: per-position char/script/language embeddings."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        if config.vocab_size <= 0:
            raise ValueError("vocab_size must be set")
        self.config = config
        self.char_emb = nn.Embedding(config.vocab_size, config.char_dim)
        self.script_emb = nn.Embedding(config.n_scripts, config.script_dim)
        self.lang_emb = nn.Embedding(config.n_langs, config.lang_dim)
        self.trunk = Trunk(config)
        self.truncated = 0

    def forward(self, char_ids: torch.Tensor, script_ids: torch.Tensor,
                lang_ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """char_ids: (batch, T); script_ids/lang_ids: (batch,) name-level."""
        if char_ids.shape[1] == 0:
            raise ValueError("empty token sequence")
        if char_ids.shape[1] > self.config.max_len:
            self.truncated += 1
            char_ids = char_ids[:, :self.config.max_len]
            lengths = lengths.clamp(max=self.config.max_len)
        t = char_ids.shape[1]
        chars = self.char_emb(char_ids)
        scripts = self.script_emb(script_ids)[:, None, :].expand(-1, t, -1)
        langs = self.lang_emb(lang_ids)[:, None, :].expand(-1, t, -1)
        x = torch.cat([chars, scripts, langs], dim=-1)
        return self.trunk(x, lengths)


@dataclass
class ModelParams:
    """Paired encoders built from one config and seed."""

    teacher: TeacherEncoder
    student: StudentEncoder
    config: EncoderConfig
    seed: int


def _init_module(module: nn.Module, seed: int) -> None:
    """Deterministic re-init: uniform +-1/sqrt(fan_in) in named order."""
    gen = torch.Generator().manual_seed(seed)
    for name, param in sorted(module.named_parameters()):
        if param.dim() >= 2:
            fan_in = int(np.prod(param.shape[1:]))
        else:
            fan_in = param.shape[0]
        bound = 1.0 / math.sqrt(max(fan_in, 1))
        with torch.no_grad():
            param.copy_(torch.empty_like(param).uniform_(-bound, bound,
                                                         generator=gen))


def init_params(config: EncoderConfig, seed: int) -> ModelParams:
    if min(config.trunk_hidden, config.embed_dim, config.pool_hidden) < 1:
        raise ValueError("invalid encoder dimensions")
    if config.trunk_in != config.feature_dim and config.trunk_in <= 0:
        raise ValueError("invalid trunk input width")
    teacher = TeacherEncoder(config)
    student = StudentEncoder(config)
    _init_module(teacher, seed)
    _init_module(student, seed + 1)
    return ModelParams(teacher=teacher, student=student, config=config,
                       seed=seed)


def param_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


# ---------------------------------------------------------------------------
# Single-input convenience paths (inference oriented)

def teacher_forward(teacher: TeacherEncoder, features: np.ndarray) -> np.ndarray:
    """Embed one feature sequence (T, 24) -> unit 128-vector."""
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("feature sequence must be (T>=1, feature_dim)")
    with torch.no_grad():
        x = torch.as_tensor(features, dtype=torch.float32)[None]
        lengths = torch.tensor([features.shape[0]], dtype=torch.int64)
        return teacher(x, lengths)[0].numpy()


def student_forward(student: StudentEncoder, vocab: Vocabulary,
                    langs: LangTable, ts: TokenSeq, script: ScriptId,
                    lang: str | None) -> np.ndarray:
    """Embed one token sequence -> unit 128-vector (UNK fallback applies)."""
    if len(ts) < 1:
        raise ValueError("empty token sequence")
    ids = vocab.encode(ts)
    with torch.no_grad():
        char_ids = torch.tensor([ids], dtype=torch.int64)
        script_ids = torch.tensor([int(script)], dtype=torch.int64)
        lang_ids = torch.tensor([langs.lookup(lang)], dtype=torch.int64)
        lengths = torch.tensor([len(ids)], dtype=torch.int64)
        return student(char_ids, script_ids, lang_ids, lengths)[0].numpy()


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors, clamped to [-1, 1]."""
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(path, module: nn.Module, config: EncoderConfig, *,
                    role: str, seed: int, phase: int, epoch: int,
                    val_loss: float, vocab_hash: str = "",
                    langs_hash: str = "", val_sim: float | None = None) -> None:
    manifest = [(name, list(p.shape))
                for name, p in sorted(module.named_parameters())]
    header = {
        "role": role,
        "config": config.__dict__,
        "vocab_hash": vocab_hash,
        "langs_hash": langs_hash,
        "seed": seed,
        "phase": phase,
        "epoch": epoch,
        "val_loss": val_loss,
        "val_sim": val_sim,
        "code_version": CODE_VERSION,
        "manifest": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(blob + b"\n")
        for name, _ in manifest:
            tensor = dict(module.named_parameters())[name]
            fh.write(tensor.detach().numpy().astype("<f4").tobytes())


def load_checkpoint(path) -> tuple[nn.Module, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"not a phonotope checkpoint (or wrong version): {path}")
        header = json.loads(fh.readline().decode("utf-8"))
        config = EncoderConfig(**header["config"])
        if header["role"] == "teacher":
            module: nn.Module = TeacherEncoder(config)
        elif header["role"] == "student":
            module = StudentEncoder(config)
        else:
            raise ValueError(f"unknown checkpoint role: {header['role']}")
        params = dict(module.named_parameters())
        for name, shape in header["manifest"]:
            n = int(np.prod(shape))
            raw = fh.read(n * 4)
            if len(raw) != n * 4:
                raise ValueError(f"truncated checkpoint: {path}")
            values = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
            with torch.no_grad():
                params[name].copy_(torch.from_numpy(values))
    return module, header


def checkpoint_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
