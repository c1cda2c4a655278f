"""Micro transformer encoder-classifier driven by scheduled, fused prompts.

The fused prompt's m slots are prepended to the token embeddings, sinusoidal
positions are added, and each layer runs

    h = LN(h + MHA(h));  h = LN(h + W2 relu(W1 h + b1) + b2)

The classifier input is the mean over positions.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import fusion
from . import scheduler as sched
from ._rng import rng_for

PINNED_LOGIT = 1000.0


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 64
    d: int = 32
    n_layers: int = 2
    n_heads: int = 4
    ffn_mult: int = 2
    max_len: int = 40
    m: int = 4
    positional: bool = True
    pool_prompt_positions: bool = True

    def __post_init__(self):
        for name in ("vocab_size", "d", "n_heads", "ffn_mult", "max_len", "m"):
            if getattr(self, name) < 1:
                raise ValueError(f"encoder.{name} must be positive, got {getattr(self, name)}")
        if self.n_layers < 0:
            raise ValueError(f"encoder.n_layers must be >= 0, got {self.n_layers}")
        if self.d % self.n_heads:
            raise ValueError(f"encoder.d={self.d} is not divisible by encoder.n_heads={self.n_heads}")
        if self.max_len <= self.m:
            raise ValueError(f"encoder.max_len={self.max_len} leaves no room after m={self.m} prompt slots")


@functools.lru_cache(maxsize=32)
def _position_table(n: int, d: int) -> np.ndarray:
    table = _sinusoid(n, d)
    table.setflags(write=False)
    return table


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    """Standard sin/cos table scaled by 1/sqrt(d) to match embedding scale."""
    return _position_table(n, d).copy()


def _sinusoid(n, d):
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table / math.sqrt(d)


@functools.lru_cache(maxsize=32)
def _positions_constant(n, d):
    return ad.constant(_position_table(n, d))


def init_encoder(cfg: EncoderConfig, seed: int) -> dict[str, ad.Tensor]:
    rng = rng_for(seed, "encoder")
    d, f = cfg.d, cfg.d * cfg.ffn_mult
    s = 1.0 / math.sqrt(d)
    p = {"encoder.tok_emb": rng.normal(0.0, s, (cfg.vocab_size, d))}
    for layer in range(cfg.n_layers):
        pre = f"encoder.layer{layer}."
        for w in ("wq", "wk", "wv", "wo"):
            p[pre + w] = rng.normal(0.0, s, (d, d))
        p[pre + "ln1.gain"] = np.ones(d)
        p[pre + "ln1.bias"] = np.zeros(d)
        p[pre + "ffn.w1"] = rng.normal(0.0, s, (d, f))
        p[pre + "ffn.b1"] = np.zeros(f)
        p[pre + "ffn.w2"] = rng.normal(0.0, 1.0 / math.sqrt(f), (f, d))
        p[pre + "ffn.b2"] = np.zeros(d)
        p[pre + "ln2.gain"] = np.ones(d)
        p[pre + "ln2.bias"] = np.zeros(d)
    return {k: ad.parameter(v, name=k) for k, v in p.items()}


def init_head(d: int, n_classes: int, seed: int, task_key) -> ad.Tensor:
    """Per-task linear head, stored (d, C) so logits = pooled @ head."""
    rng = rng_for(seed, "head", task_key)
    return ad.parameter(rng.normal(0.0, 1.0 / math.sqrt(d), (d, n_classes)), name=f"heads.{task_key}")


def _attention(h, params, pre, cfg: EncoderConfig):
    B, N, d = h.shape
    H = cfg.n_heads
    dh = d // H

    def heads(w, axes):
        return ad.transpose(ad.reshape(ad.matmul(h, params[pre + w]), (B, N, H, dh)), axes)

    q = heads("wq", (0, 2, 1, 3))  # B H N dh
    k = heads("wk", (0, 2, 3, 1))  # B H dh N
    v = heads("wv", (0, 2, 1, 3))
    att = ad.softmax_temp(ad.matmul(q, k), math.sqrt(dh))
    o = ad.reshape(ad.transpose(ad.matmul(att, v), (0, 2, 1, 3)), (B, N, d))
    return ad.matmul(o, params[pre + "wo"])


def encode(tokens, fused: fusion.FusedPrompt, params: dict, cfg: EncoderConfig) -> ad.Tensor:
    """Pooled (B, d) representation of ``[fused slots; token embeddings]``."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    B, L = tokens.shape
    m = fused.slots.shape[0]
    if L + m > cfg.max_len:
        raise ValueError(f"encode: {L} tokens + {m} prompt slots exceed max_len={cfg.max_len}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        raise ValueError(f"encode: token id outside [0, {cfg.vocab_size})")
    x = ad.embedding(params["encoder.tok_emb"], tokens)
    h = ad.concat([ad.expand(fused.slots, (B,)), x], axis=1)
    if cfg.positional:
        h = ad.add(h, _positions_constant(m + L, cfg.d))
    for layer in range(cfg.n_layers):
        pre = f"encoder.layer{layer}."
        h = ad.layer_norm(ad.add(h, _attention(h, params, pre, cfg)),
                          params[pre + "ln1.gain"], params[pre + "ln1.bias"])
        f = ad.relu(ad.add(ad.matmul(h, params[pre + "ffn.w1"]), params[pre + "ffn.b1"]))
        f = ad.add(ad.matmul(f, params[pre + "ffn.w2"]), params[pre + "ffn.b2"])
        h = ad.layer_norm(ad.add(h, f), params[pre + "ln2.gain"], params[pre + "ln2.bias"])
    if not cfg.pool_prompt_positions:
        h = ad.slice_axis(h, 1, m, m + L)
    return ad.mean(h, axis=1)


def predict(pooled: ad.Tensor, head: ad.Tensor) -> ad.Tensor:
    if pooled.shape[-1] != head.shape[0]:
        raise ad.ShapeError(f"predict: pooled {pooled.shape} vs head {head.shape}")
    return ad.matmul(pooled, head)


@dataclass
class PromptedModel:
    """All learnable state for one multi-task run.

    ``pin_schedule`` replaces the learnable logits with constant one-hot rows
    (margin ``PINNED_LOGIT * tau``, so exp underflows to exactly 0 off the
    diagonal and each weight row is exactly one-hot);
    ``pin_gate`` fixes the gate to exactly 1, so the fused prompt is the
    composed prompt and task embeddings are bypassed.
    """

    cfg: EncoderConfig
    pool: sched.PromptPool
    schedule: sched.SchedulerState
    task_table: fusion.TaskEmbeddingTable
    encoder: dict
    heads: list
    pin_schedule: bool = False
    pin_gate: bool = False

    @classmethod
    def create(cls, cfg: EncoderConfig, n_classes: list, K: int, tau: float, seed: int,
               pin_schedule=False, pin_gate=False):
        T = len(n_classes)
        pool, schedule = sched.init_scheduler(T, K, cfg.d, seed, m=cfg.m, tau=tau)
        if pin_schedule:
            if K != T:
                raise ValueError(f"pinned one-hot scheduling needs K == T, got K={K}, T={T}")
            schedule = sched.SchedulerState(ad.constant(np.eye(T) * (PINNED_LOGIT * tau), name="scheduler.logits"), tau)
        table = fusion.init_task_embeddings(T, cfg.d, seed)
        heads = [init_head(cfg.d, c, seed, t) for t, c in enumerate(n_classes)]
        return cls(cfg, pool, schedule, table, init_encoder(cfg, seed), heads, pin_schedule, pin_gate)

    @property
    def T(self):
        return len(self.heads)

    def named_parameters(self) -> dict[str, ad.Tensor]:
        out = {
            "scheduler.logits": self.schedule.logits,
            "pool.prompts": self.pool.prompts,
            "fusion.embeddings": self.task_table.embeddings,
            "fusion.gate_matrix": self.task_table.gate_matrix,
        }
        out.update(self.encoder)
        for t, h in enumerate(self.heads):
            out[f"heads.{t}"] = h
        return out

    def trainable(self) -> dict[str, ad.Tensor]:
        return {k: v for k, v in self.named_parameters().items() if v.requires_grad}

    def freeze(self, names):
        params = self.named_parameters()
        for name in names:
            params[name].requires_grad = False

    def freeze_backbone(self):
        self.freeze(list(self.encoder))

    def weights(self, t: int) -> ad.Tensor:
        return sched.schedule_weights(self.schedule, t)

    def fused_prompt(self, t: int) -> fusion.FusedPrompt:
        composed = sched.compose_prompt(self.weights(t), self.pool, t)
        if self.pin_gate:
            d = self.cfg.d
            e_t = ad.constant(self.task_table.embeddings.values[t])
            return fusion.fuse(ad.constant(np.ones(d)), composed, e_t)
        e_t = self.task_table.embedding(t)
        gate = fusion.gate_vector(e_t, self.task_table.gate_matrix)
        return fusion.fuse(gate, composed, e_t)

    def logits(self, tokens, t: int) -> ad.Tensor:
        pooled = encode(tokens, self.fused_prompt(t), self.encoder, self.cfg)
        return predict(pooled, self.heads[t])

    def mean_gate(self, t: int) -> float:
        if self.pin_gate:
            return 1.0
        e = self.task_table.embeddings.values[t]
        pre = self.task_table.gate_matrix.values @ e
        return float(np.mean(1.0 / (1.0 + np.exp(-pre))))


def task_loss(model: PromptedModel, tokens, labels, t: int) -> ad.Tensor:
    """Mean cross-entropy of task ``t`` on one batch."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("task_loss: empty batch")
    n_classes = model.heads[t].shape[1]
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"task_loss: label outside [0, {n_classes}) for task {t}")
    return ad.cross_entropy(model.logits(tokens, t), labels)


def accuracy(model: PromptedModel, tokens, labels, t: int) -> float:
    pred = model.logits(tokens, t).values.argmax(axis=1)
    return float((pred == np.asarray(labels)).mean())
