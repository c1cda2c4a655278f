"""Multi-task training with adaptive loss weights.

The total objective is ``sum_t lambda_t * L_t``. Each step evaluates every
task's loss on its own batch and backpropagates it separately, so per-task
gradients of the prompt pool (the shared-parameter probe) are available for
the lambda update. The weighted total gradient is then formed by linearity
in fixed task order, which is what backpropagating the aggregate would give.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import fusion
from . import scheduler as sched
from ._rng import rng_for
from .model import EncoderConfig, PromptedModel, accuracy, init_head, task_loss

logger = logging.getLogger(__name__)

STRATEGIES = ("fixed", "grad-norm", "inverse-loss")
OPTIMIZERS = ("sgd", "adam")


class TrainingDiverged(RuntimeError):
    def __init__(self, step, trace):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step
        self.trace = trace


@dataclass
class LossWeights:
    lambdas: np.ndarray
    strategy: str = "grad-norm"

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown lambda strategy {self.strategy!r}; expected one of {STRATEGIES}")
        T = len(self.lambdas)
        if T == 0 or (self.lambdas <= 0).any():
            raise ValueError("loss weights must be a nonempty positive vector")
        if abs(self.lambdas.sum() - T) > 1e-9 * T:
            raise ValueError(f"loss weights sum to {self.lambdas.sum()!r}, expected T={T}")

    @classmethod
    def uniform(cls, T, strategy="grad-norm"):
        return cls(np.ones(T), strategy)


def aggregate_loss(losses, weights: LossWeights):
    """Weighted total; a Tensor if ``losses`` are Tensors, else a float."""
    if len(losses) != len(weights.lambdas):
        raise ValueError(f"aggregate_loss: {len(losses)} losses for {len(weights.lambdas)} weights")
    if all(isinstance(x, ad.Tensor) for x in losses):
        stacked = ad.concat([ad.reshape(x, (1,)) for x in losses], axis=0)
        return ad.sum(ad.mul(stacked, ad.constant(weights.lambdas)))
    return float(np.dot(weights.lambdas, np.asarray(losses, dtype=np.float64)))


def update_lambdas(grad_norms, losses, weights: LossWeights, smoothing: float = 0.9,
                   eps_floor: float = 1e-8) -> LossWeights:
    """One lambda update.

    ``grad-norm`` targets lambda_t proportional to 1/||g_t|| so that every
    lambda_t * ||g_t|| is equal; ``inverse-loss`` uses 1/L_t instead. Targets
    are normalized to sum to T and blended in as
    ``smoothing * old + (1 - smoothing) * target``.
    """
    if weights.strategy == "fixed":
        return LossWeights(weights.lambdas.copy(), "fixed")
    src = np.asarray(grad_norms if weights.strategy == "grad-norm" else losses, dtype=np.float64)
    T = len(weights.lambdas)
    if src.shape != (T,):
        raise ValueError(f"update_lambdas: expected {T} values, got shape {src.shape}")
    if (src < 0).any():
        raise ValueError("update_lambdas: gradient norms and losses must be nonnegative")
    if (src < eps_floor).all():
        return LossWeights(np.ones(T), weights.strategy)
    inv = 1.0 / np.maximum(src, eps_floor)
    target = inv * (T / inv.sum())
    new = smoothing * weights.lambdas + (1.0 - smoothing) * target
    return LossWeights(new * (T / new.sum()), weights.strategy)


class SGD:
    def __init__(self, lr, lr_scale=None):
        self.lr = lr
        self.lr_scale = dict(lr_scale or {})

    def step(self, params, grads):
        for name, p in params.items():
            g = grads.get(name)
            if g is not None:
                p.values = p.values - self.lr * self.lr_scale.get(name, 1.0) * g


class Adam:
    def __init__(self, lr=3e-3, beta1=0.9, beta2=0.999, eps=1e-8, lr_scale=None):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.lr_scale = dict(lr_scale or {})
        self.m, self.v, self.t = {}, {}, {}

    def step(self, params, grads):
        b1, b2 = self.beta1, self.beta2
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            t = self.t[name] = self.t.get(name, 0) + 1
            m = self.m[name] = b1 * self.m.get(name, 0.0) + (1.0 - b1) * g
            v = self.v[name] = b2 * self.v.get(name, 0.0) + (1.0 - b2) * (g * g)
            mhat = m / (1.0 - b1 ** t)
            vhat = v / (1.0 - b2 ** t)
            p.values = p.values - self.lr * self.lr_scale.get(name, 1.0) * mhat / (np.sqrt(vhat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    steps: int = 300
    batch_size: int = 32
    learning_rate: float = 3e-3
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda_strategy: str = "grad-norm"
    lambda_smoothing: float = 0.9
    eps_floor: float = 1e-8
    tau: float = 0.9
    K: int = 4
    logits_lr_scale: float = 1.0
    freeze_backbone: bool = False
    pin_schedule: bool = False
    pin_gate: bool = False
    eval_every: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def validate(self):
        def positive(name):
            if not getattr(self, name) > 0:
                raise ValueError(f"train.{name} must be positive, got {getattr(self, name)!r}")

        for name in ("batch_size", "learning_rate", "tau", "K", "eps_floor", "adam_eps",
                     "logits_lr_scale"):
            positive(name)
        for name in ("steps", "eval_every", "seed"):
            if getattr(self, name) < 0:
                raise ValueError(f"train.{name} must be >= 0, got {getattr(self, name)!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"train.optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.lambda_strategy not in STRATEGIES:
            raise ValueError(f"train.lambda_strategy must be one of {STRATEGIES}, got {self.lambda_strategy!r}")
        for name in ("lambda_smoothing", "adam_beta1", "adam_beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"train.{name} must lie in [0, 1), got {getattr(self, name)!r}")
        return self


@dataclass
class MetricsReport:
    task_names: list
    val_accuracy: list
    test_accuracy: list
    loss_trace: list = field(default_factory=list)  # per step: list of T losses
    lambda_trace: list = field(default_factory=list)
    entropy_trace: list = field(default_factory=list)  # per step: list of T entropies
    mean_gate: list = field(default_factory=list)
    gate_rows: list = field(default_factory=list)  # (step, task, mean_gate, entropy)
    final_entropy: list = field(default_factory=list)
    transfer_gain: float | None = None
    wall_seconds: float = 0.0

    @property
    def macro_val(self):
        return float(np.mean(self.val_accuracy))

    @property
    def macro_test(self):
        return float(np.mean(self.test_accuracy))

    @property
    def mean_entropy(self):
        return float(np.mean(self.final_entropy))


class BatchSampler:
    """Epoch-shuffled minibatches from one task's training split.

    Seeded by (run seed, task uid), so a task draws the same batches whether
    it is trained alone or inside a larger suite.
    """

    def __init__(self, split, batch_size, seed, uid):
        self.split = split
        self.batch_size = min(batch_size, len(split))
        self.rng = rng_for(seed, "batches", uid)
        self.order = np.empty(0, dtype=np.int64)
        self.pos = 0

    def next(self):
        if self.pos + self.batch_size > len(self.order):
            self.order = self.rng.permutation(len(self.split))
            self.pos = 0
        idx = self.order[self.pos:self.pos + self.batch_size]
        self.pos += self.batch_size
        return self.split.tokens[idx], self.split.labels[idx]


def build_model(config: TrainConfig, suite) -> PromptedModel:
    model = PromptedModel.create(config.encoder, [t.n_classes for t in suite.tasks], config.K,
                                 config.tau, config.seed, pin_schedule=config.pin_schedule,
                                 pin_gate=config.pin_gate)
    if config.freeze_backbone:
        model.freeze_backbone()
    if config.pin_gate:
        model.freeze(["fusion.embeddings", "fusion.gate_matrix"])
    return model


def make_optimizer(config: TrainConfig):
    scale = {"scheduler.logits": config.logits_lr_scale}
    if config.optimizer == "sgd":
        return SGD(config.learning_rate, scale)
    return Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps, scale)


def task_gradients(model: PromptedModel, tokens, labels, t, names_by_id):
    """Loss value and {param name: grad} for one task batch."""
    loss = task_loss(model, tokens, labels, t)
    ad.backward(loss)
    grads = {}
    for leaf in loss.record.leaves.values():
        name = names_by_id.get(id(leaf))
        if name is not None and leaf.grad is not None:
            grads[name] = leaf.grad
    return loss.item(), grads


def evaluate(model: PromptedModel, suite, split="val"):
    return [accuracy(model, getattr(task, split).tokens, getattr(task, split).labels, t)
            for t, task in enumerate(suite.tasks)]


def _entropies(model):
    return [sched.scheduling_entropy(model.weights(t)) for t in range(model.T)]


def train(config: TrainConfig, suite, model: PromptedModel | None = None):
    """Train ``model`` (built from ``config`` if omitted) on every task of ``suite``."""
    config.validate()
    if suite.T < 1:
        raise ValueError("train: empty task suite")
    start = time.perf_counter()
    if model is None:
        model = build_model(config, suite)
    if model.T != suite.T:
        raise ValueError(f"train: model has {model.T} task heads, suite has {suite.T} tasks")
    params = model.trainable()
    names_by_id = {id(p): n for n, p in params.items()}
    samplers = [BatchSampler(task.train, config.batch_size, config.seed, task.uid) for task in suite.tasks]
    opt = make_optimizer(config)
    weights = LossWeights.uniform(suite.T, config.lambda_strategy)
    report = MetricsReport([t.name for t in suite.tasks], [], [])

    def log_gates(step):
        ent = _entropies(model)
        for t in range(model.T):
            report.gate_rows.append((step, t, model.mean_gate(t), ent[t]))

    for step in range(config.steps):
        if config.eval_every and step % config.eval_every == 0:
            log_gates(step)
        losses, grads, norms = [], [], []
        for t in range(suite.T):
            tokens, labels = samplers[t].next()
            try:
                value, g = task_gradients(model, tokens, labels, t, names_by_id)
            except ad.NonFiniteError as exc:
                raise TrainingDiverged(step, report) from exc
            if not math.isfinite(value):
                raise TrainingDiverged(step, report)
            losses.append(value)
            grads.append(g)
            probe = g.get("pool.prompts")
            norms.append(0.0 if probe is None else float(np.sqrt((probe * probe).sum())))
        weights = update_lambdas(norms, losses, weights, config.lambda_smoothing, config.eps_floor)
        total = {}
        for lam, g in zip(weights.lambdas, grads):
            for name, gv in g.items():
                total[name] = lam * gv if name not in total else total[name] + lam * gv
        opt.step(params, total)
        report.loss_trace.append(losses)
        report.lambda_trace.append(weights.lambdas.tolist())
        report.entropy_trace.append(_entropies(model))

    log_gates(config.steps)
    report.val_accuracy = evaluate(model, suite, "val")
    report.test_accuracy = evaluate(model, suite, "test")
    report.mean_gate = [model.mean_gate(t) for t in range(model.T)]
    report.final_entropy = _entropies(model)
    report.wall_seconds = time.perf_counter() - start
    return model, report


# --------------------------------------------------------------------------
# derived models


def _copy(t: ad.Tensor, trainable=None) -> ad.Tensor:
    out = ad.Tensor(t.values, requires_grad=t.requires_grad if trainable is None else trainable, name=t.name)
    return out


def single_task_slice(model: PromptedModel, t: int) -> PromptedModel:
    """Independent single-task, single-prompt model cut from ``model``'s state.

    The new model holds copies of pool prompt ``t``, task embedding ``t``, the
    gate matrix, the encoder and head ``t``. Only meaningful when ``model``
    schedules task t onto prompt t (pinned one-hot rows).
    """
    tau = model.schedule.tau
    pool = sched.PromptPool(ad.Tensor(model.pool.prompts.values[t:t + 1], requires_grad=True, name="pool.prompts"))
    if model.pin_schedule:
        logits = ad.constant([[model.schedule.logits.values[t, t]]], name="scheduler.logits")
    else:
        logits = ad.parameter(model.schedule.logits.values[t:t + 1, t:t + 1], name="scheduler.logits")
    table = fusion.TaskEmbeddingTable(
        _copy(ad.Tensor(model.task_table.embeddings.values[t:t + 1], requires_grad=model.task_table.embeddings.requires_grad)),
        _copy(model.task_table.gate_matrix),
    )
    return PromptedModel(model.cfg, pool, sched.SchedulerState(logits, tau), table,
                         {k: _copy(v) for k, v in model.encoder.items()}, [_copy(model.heads[t])],
                         model.pin_schedule, model.pin_gate)


def adaptation_model(model: PromptedModel, n_classes: int, seed: int, uid: int) -> PromptedModel:
    """Fresh single-task model for a held-out task on top of a trained one.

    Pool, gate matrix and encoder are shared and frozen; the new scheduling
    row (zeros), task embedding and head are the only trainable leaves.
    """
    d = model.cfg.d
    rng = rng_for(seed, "heldout_embedding", uid)
    emb = ad.parameter(rng.normal(0.0, 1.0 / math.sqrt(d), (1, d)), name="fusion.embeddings")
    gate = ad.Tensor(model.task_table.gate_matrix.values, requires_grad=False, name="fusion.gate_matrix")
    logits = ad.parameter(np.zeros((1, model.pool.K)), name="scheduler.logits")
    pool = sched.PromptPool(ad.Tensor(model.pool.prompts.values, requires_grad=False, name="pool.prompts"))
    encoder = {k: ad.Tensor(v.values, requires_grad=False, name=k) for k, v in model.encoder.items()}
    head = init_head(d, n_classes, seed, f"heldout{uid}")
    adapted = PromptedModel(model.cfg, pool, sched.SchedulerState(logits, model.schedule.tau),
                            fusion.TaskEmbeddingTable(emb, gate), encoder, [head],
                            pin_schedule=False, pin_gate=model.pin_gate)
    if model.pin_gate:
        adapted.freeze(["fusion.embeddings"])
    return adapted


def adapt_and_score(model: PromptedModel, task, config: TrainConfig, steps: int,
                    batch_size=None, learning_rate=None) -> float:
    """Adapt a fresh row/embedding/head to ``task`` and return its test accuracy."""
    adapted = adaptation_model(model, task.n_classes, config.seed, task.uid)
    one = _SingleSuite(task)
    cfg = replace(config, steps=steps, lambda_strategy="fixed", eval_every=0,
                  batch_size=batch_size or config.batch_size,
                  learning_rate=learning_rate or config.learning_rate)
    adapted, _ = train(cfg, one, model=adapted)
    return accuracy(adapted, task.test.tokens, task.test.labels, 0)


class _SingleSuite:
    def __init__(self, task):
        self.tasks = [task]

    @property
    def T(self):
        return 1


def gain_ratio(scheduled_accuracies, baseline_accuracies) -> float:
    """mean(scheduled) / mean(baseline); NaN when the baseline mean is 0."""
    base = float(np.mean(baseline_accuracies))
    if base == 0.0:
        logger.warning("transfer gain undefined: baseline accuracy is 0")
        return math.nan
    return float(np.mean(scheduled_accuracies)) / base


def transfer_gain(model: PromptedModel, heldout, baseline: PromptedModel, config: TrainConfig,
                  steps: int = 200, batch_size=None, learning_rate=None) -> float:
    """Held-out adaptation accuracy of ``model`` relative to ``baseline``.

    ``heldout`` is a list of tasks never seen in training. Both models get the
    same adaptation budget, batch size, learning rate and seeds.
    """
    if not heldout:
        raise ValueError("transfer_gain: no held-out tasks")
    kw = dict(batch_size=batch_size, learning_rate=learning_rate)
    ours = [adapt_and_score(model, task, config, steps, **kw) for task in heldout]
    base = [adapt_and_score(baseline, task, config, steps, **kw) for task in heldout]
    return gain_ratio(ours, base)


def single_prompt_runs(config: TrainConfig, suite):
    """Loss traces of the pinned multi-task run and of T independent single-task runs.

    ``config`` must pin the schedule and gate, freeze the backbone and use
    fixed lambdas; every single-task run starts from a slice of the same
    initial model. Returns two (steps, T) arrays.
    """
    if not (config.pin_schedule and config.pin_gate and config.freeze_backbone):
        raise ValueError("single_prompt_runs needs pin_schedule, pin_gate and freeze_backbone")
    if config.lambda_strategy != "fixed":
        raise ValueError("single_prompt_runs needs the fixed lambda strategy")
    model = build_model(config, suite)
    singles = [single_task_slice(model, t) for t in range(suite.T)]
    _, joint = train(config, suite, model=model)
    cols = []
    for t, single in enumerate(singles):
        _, rep = train(replace(config, K=1), suite.subset([t]), model=single)
        cols.append([row[0] for row in rep.loss_trace])
    return np.array(joint.loss_trace), np.array(cols).T
