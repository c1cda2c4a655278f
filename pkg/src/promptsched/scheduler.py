"""Prompt pool and per-task scheduling weights.

A task's weights are ``softmax(z_t / tau)`` over the K pool prompts, where
``z_t`` is row t of a free learnable logit matrix. The composed prompt is the
convex combination of pool prompts under those weights, applied per virtual
token slot (the pool is K x m x d).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from ._rng import rng_for


@dataclass
class PromptPool:
    prompts: ad.Tensor  # (K, m, d)

    @property
    def K(self):
        return self.prompts.shape[0]

    @property
    def m(self):
        return self.prompts.shape[1]

    @property
    def d(self):
        return self.prompts.shape[2]


@dataclass
class SchedulerState:
    logits: ad.Tensor  # Z, (T, K)
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"scheduler temperature must be positive, got {self.tau}")
        if self.logits.values.ndim != 2:
            raise ValueError(f"scheduler logits must be T x K, got shape {self.logits.shape}")

    @property
    def T(self):
        return self.logits.shape[0]

    @property
    def K(self):
        return self.logits.shape[1]

    def weight_matrix(self) -> np.ndarray:
        """All T weight rows as a plain array (no record)."""
        return np.vstack([schedule_weights(self, t).values for t in range(self.T)])


@dataclass
class ComposedPrompt:
    vector: ad.Tensor  # (m, d)
    task_id: int


def init_scheduler(T: int, K: int, d: int, seed: int, m: int = 4, tau: float = 1.0):
    """Zero logits (uniform scheduling) and N(0, 1/d) pool prompts."""
    for name, v in (("T", T), ("K", K), ("d", d), ("m", m)):
        if int(v) != v or v < 1:
            raise ValueError(f"init_scheduler: {name} must be a positive integer, got {v}")
    rng = rng_for(seed, "pool")
    prompts = rng.normal(0.0, 1.0 / math.sqrt(d), size=(K, m, d))
    pool = PromptPool(ad.parameter(prompts, name="pool.prompts"))
    state = SchedulerState(ad.parameter(np.zeros((T, K)), name="scheduler.logits"), float(tau))
    return pool, state


def schedule_weights(state: SchedulerState, t: int) -> ad.Tensor:
    if not 0 <= t < state.T:
        raise IndexError(f"schedule_weights: task {t} outside [0, {state.T})")
    return ad.softmax_temp(ad.index(state.logits, t), state.tau)


def compose_prompt(weights: ad.Tensor, pool: PromptPool, task_id: int = 0) -> ComposedPrompt:
    w = weights.values
    if w.shape != (pool.K,):
        raise ValueError(f"compose_prompt: {w.shape[0] if w.ndim == 1 else w.shape} weights for a pool of K={pool.K}")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"compose_prompt: weights sum to {w.sum()!r}, not 1")
    K, m, d = pool.prompts.shape
    flat = ad.matmul(ad.reshape(weights, (1, K)), ad.reshape(pool.prompts, (K, m * d)))
    return ComposedPrompt(ad.reshape(flat, (m, d)), task_id)


def scheduling_entropy(weights) -> float:
    """Shannon entropy (nats) of a weight vector, with 0 ln 0 = 0."""
    w = np.asarray(weights.values if isinstance(weights, ad.Tensor) else weights, dtype=np.float64)
    if (w < 0).any():
        raise ValueError("scheduling_entropy: negative weight")
    nz = w[w > 0]
    return float(-(nz * np.log(nz)).sum())


def weights_csv(state: SchedulerState) -> str:
    W = state.weight_matrix()
    out = io.StringIO()
    out.write("task," + ",".join(f"k{k}" for k in range(state.K)) + "\n")
    for t, row in enumerate(W):
        out.write(f"{t}," + ",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()
