"""Sigmoid-gated blend of the composed prompt with a task embedding.

    final = g * composed + (1 - g) * e_t,    g = sigmoid(W_g e_t)

``e_t`` is broadcast across the m prompt slots. There is no gate bias.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from ._rng import rng_for
from .scheduler import ComposedPrompt

SATURATION_THRESHOLD = 10.0


@dataclass
class TaskEmbeddingTable:
    embeddings: ad.Tensor  # (T, d)
    gate_matrix: ad.Tensor  # (d, d)

    @property
    def T(self):
        return self.embeddings.shape[0]

    @property
    def d(self):
        return self.embeddings.shape[1]

    def embedding(self, t: int) -> ad.Tensor:
        if not 0 <= t < self.T:
            raise IndexError(f"task {t} outside [0, {self.T})")
        return ad.index(self.embeddings, t)


@dataclass
class FusedPrompt:
    slots: ad.Tensor  # (m, d)
    task_id: int
    gate_values: np.ndarray  # (d,)


def init_task_embeddings(T: int, d: int, seed: int) -> TaskEmbeddingTable:
    rng = rng_for(seed, "task_embeddings")
    emb = rng.normal(0.0, 1.0 / math.sqrt(d), size=(T, d))
    return TaskEmbeddingTable(
        ad.parameter(emb, name="fusion.embeddings"),
        ad.parameter(np.zeros((d, d)), name="fusion.gate_matrix"),
    )


def gate_vector(e_t: ad.Tensor, W_g: ad.Tensor) -> ad.Tensor:
    d = e_t.shape[0]
    if e_t.values.ndim != 1 or W_g.shape != (d, d):
        raise ad.ShapeError(f"gate_vector: W_g {W_g.shape} does not map e_t {e_t.shape} to itself")
    pre = ad.matmul(W_g, ad.reshape(e_t, (d, 1)))
    return ad.sigmoid(ad.reshape(pre, (d,)))


def gate_saturation(e_t: ad.Tensor, W_g: ad.Tensor) -> float:
    """Fraction of gate pre-activations with |W_g e_t| above the saturation threshold."""
    pre = W_g.values @ e_t.values
    return float((np.abs(pre) > SATURATION_THRESHOLD).mean())


def fuse(gate: ad.Tensor, composed: ComposedPrompt, e_t: ad.Tensor) -> FusedPrompt:
    slots = composed.vector
    d = slots.shape[-1]
    if gate.shape != (d,) or e_t.shape != (d,):
        raise ad.ShapeError(f"fuse: gate {gate.shape}, prompt slots {slots.shape} and "
                            f"embedding {e_t.shape} must share dimension {d}")
    blended = ad.add(ad.mul(slots, gate), ad.mul(ad.one_minus(gate), e_t))
    return FusedPrompt(blended, composed.task_id, gate.values.copy())


def gates_csv(rows) -> str:
    """``rows``: iterable of (step, task, mean_gate, entropy_of_weights)."""
    out = io.StringIO()
    out.write("step,task,mean_gate,entropy_of_weights\n")
    for step, task, g, h in rows:
        out.write(f"{step},{task},{float(g)!r},{float(h)!r}\n")
    return out.getvalue()
