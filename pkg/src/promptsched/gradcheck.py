"""Finite-difference check of the whole stack at a small size.

Scheduling softmax, prompt composition, gated fusion, a one-layer encoder,
per-task heads and the lambda-weighted total loss are differentiated with
respect to every parameter at once.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from ._rng import rng_for
from .model import EncoderConfig, PromptedModel, task_loss
from .trainer import LossWeights, aggregate_loss

CHECK_CFG = EncoderConfig(vocab_size=10, d=8, n_layers=1, n_heads=2, ffn_mult=2, max_len=12, m=2)


def pipeline_problem(seed=0, cfg: EncoderConfig = CHECK_CFG, T=2, K=3, tau=0.9, batch=3, seq_len=5):
    """(loss function, parameter leaves) with random (not zero) logits and gate."""
    model = PromptedModel.create(cfg, [2] * T, K, tau, seed)
    rng = rng_for(seed, "gradcheck")
    # zero init would leave the logits and gate paths at a symmetric point
    model.schedule.logits.values = rng.normal(0.0, 1.0, (T, K))
    model.task_table.gate_matrix.values = rng.normal(0.0, 1.0, (cfg.d, cfg.d))
    tokens = [rng.integers(0, cfg.vocab_size, size=(batch, seq_len)) for _ in range(T)]
    labels = [rng.integers(0, 2, size=batch) for _ in range(T)]
    lam = rng.uniform(0.5, 1.5, T)
    weights = LossWeights(lam * (T / lam.sum()), "fixed")

    def loss():
        return aggregate_loss([task_loss(model, tokens[t], labels[t], t) for t in range(T)], weights)

    return loss, list(model.named_parameters().values())


def pipeline_grad_check(seed=0, epsilon=1e-5) -> float:
    fn, leaves = pipeline_problem(seed)
    return ad.grad_check(fn, [p for p in leaves if p.requires_grad], epsilon)


def parameter_count(seed=0) -> int:
    _, leaves = pipeline_problem(seed)
    return int(sum(np.prod(p.shape) for p in leaves))
