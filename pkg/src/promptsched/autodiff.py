"""Reverse-mode automatic differentiation over dense float64 tensors.

Every primitive call appends one node to a :class:`ComputationRecord`. Leaf
tensors (parameters, constants) live outside any record and are registered by
identity the first time a record sees them, so the same parameter can feed
many records (one per training step). Backward walks the record in reverse
append order, which is a fixed topological order, so gradients are
bit-deterministic.

Parameters are never mutated in place by this package: optimizers rebind
``tensor.values``. Records therefore keep the exact leaf arrays they saw and
:meth:`ComputationRecord.replay` can recompute every activation.
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)


class ShapeError(ValueError):
    pass


class NonFiniteError(ValueError):
    pass


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "name", "record", "node_id")

    def __init__(self, values, requires_grad=False, name=None):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.values = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self.record = None
        self.node_id = None

    @classmethod
    def _from_op(cls, values, record, node_id):
        t = cls.__new__(cls)
        t.values = values
        t.grad = None
        t.requires_grad = False
        t.name = None
        t.record = record
        t.node_id = node_id
        return t

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_leaf(self):
        return self.record is None

    def item(self):
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self):
        return self.values

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"


class Node:
    __slots__ = ("op", "inputs", "output", "saved", "attrs")

    def __init__(self, op, inputs, output, saved, attrs=None):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.saved = saved
        self.attrs = {} if attrs is None else attrs

    def __repr__(self):
        return f"Node({self.op!r}, inputs={self.inputs}, output={self.output})"


class ComputationRecord:
    """Ordered log of primitive applications.

    ``values[i]`` is the forward value with id ``i``; ids are handed out in
    append order, so every node's inputs precede its output. When an op
    combines tensors from two records, the younger record is appended onto
    the older one and left behind as a forwarding stub.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.values: list[np.ndarray] = []
        self.needs_grad: list[bool] = []
        self.producer: list[int] = []  # node index per id, -1 for leaves
        self.leaves: dict[int, Tensor] = {}
        self._leaf_ids: dict[int, int] = {}
        self._forward = None  # (target record, id remap) once absorbed

    def register(self, tensor: Tensor) -> int:
        if tensor.record is self:
            return tensor.node_id
        if tensor.record is not None:
            raise ValueError("tensor belongs to a different computation record")
        key = id(tensor)
        nid = self._leaf_ids.get(key)
        if nid is None:
            nid = len(self.values)
            self.values.append(tensor.values)
            self.needs_grad.append(bool(tensor.requires_grad))
            self.producer.append(-1)
            self.leaves[nid] = tensor
            self._leaf_ids[key] = nid
        return nid

    def append(self, op, input_ids, out, saved, attrs) -> int:
        nid = len(self.values)
        needs = self.needs_grad
        self.values.append(out)
        needs.append(any([needs[i] for i in input_ids]))
        self.producer.append(len(self.nodes))
        self.nodes.append(Node(op, tuple(input_ids), nid, saved, attrs))
        return nid

    def absorb(self, other: "ComputationRecord") -> None:
        """Append ``other``'s entries (deduplicating shared leaves) onto this record."""
        remap = [0] * len(other.values)
        for i, p in enumerate(other.producer):
            if p < 0:
                remap[i] = self.register(other.leaves[i])
            else:
                node = other.nodes[p]
                remap[i] = self.append(node.op, [remap[j] for j in node.inputs],
                                       other.values[i], node.saved, node.attrs)
        other._forward = (self, remap)
        other.nodes, other.values, other.needs_grad, other.producer = [], [], [], []
        other.leaves, other._leaf_ids = {}, {}

    def replay(self) -> bool:
        """Recompute every node from the recorded leaves; True if bit-identical."""
        vals = list(self.values)
        for node in self.nodes:
            prim = PRIMITIVES[node.op]
            out, _ = prim.forward(*(vals[i] for i in node.inputs), **node.attrs)
            out = np.asarray(out, dtype=np.float64)
            if out.shape != self.values[node.output].shape or not np.array_equal(
                out.view(np.uint64), self.values[node.output].view(np.uint64)
            ):
                return False
            vals[node.output] = out
        return True

    def __len__(self):
        return len(self.nodes)


def _resolve(t: Tensor) -> None:
    """Follow forwarding stubs so ``t.record``/``t.node_id`` are current."""
    rec = t.record
    while rec is not None and rec._forward is not None:
        target, remap = rec._forward
        t.node_id = remap[t.node_id]
        rec = target
    t.record = rec


def _record_of(inputs: Sequence[Tensor]) -> ComputationRecord:
    first = inputs[0].record
    if first is not None and first._forward is None and all(t.record is first for t in inputs):
        return first
    recs = []
    for t in inputs:
        _resolve(t)
        if t.record is not None and all(t.record is not r for r in recs):
            recs.append(t.record)
    if not recs:
        return ComputationRecord()
    base = max(recs, key=lambda r: len(r.values))
    for r in recs:
        if r is not base:
            base.absorb(r)
    for t in inputs:
        _resolve(t)
    return base


def apply(op: str, *inputs: Tensor, **attrs) -> Tensor:
    """Run primitive ``op`` forward and append it to the inputs' record."""
    prim = PRIMITIVES[op]
    if prim.arity is not None and len(inputs) != prim.arity:
        raise ShapeError(f"{op}: expected {prim.arity} inputs, got {len(inputs)}")
    # op outputs are checked as they are produced, so only leaves need a scan here
    for t in inputs:
        if not isinstance(t, Tensor):
            raise TypeError(f"{op}: inputs must be Tensor, got {type(t).__name__}")
        if t.record is None and not np.isfinite(t.values).all():
            raise NonFiniteError(f"{op}: non-finite input of shape {t.shape}")
    arrays = [t.values for t in inputs]
    prim.check(*arrays, **attrs)
    # overflow is reported through NonFiniteError below, not numpy warnings
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out, saved = prim.forward(*arrays, **attrs)
    if not np.isfinite(out).all():
        raise NonFiniteError(f"{op}: non-finite output of shape {out.shape} from finite inputs")
    rec = _record_of(inputs)
    ids = [rec.register(t) for t in inputs]
    nid = rec.append(op, ids, out, saved, attrs)
    return Tensor._from_op(out, rec, nid)


def _backward_pass(rec, grads, needs, last_node):
    """Reverse sweep over nodes ``0..last_node`` accumulating into ``grads``."""
    for node in reversed(rec.nodes[: last_node + 1]):
        g = grads[node.output]
        if g is None:
            continue
        want = tuple(needs[i] for i in node.inputs)
        if not any(want):
            continue
        prim = PRIMITIVES[node.op]
        in_grads = prim.backward(
            g, [rec.values[i] for i in node.inputs], rec.values[node.output], node.saved, want, **node.attrs
        )
        for i, w, gi in zip(node.inputs, want, in_grads):
            if not w or gi is None:
                continue
            grads[i] = gi if grads[i] is None else grads[i] + gi


def backward(loss: Tensor, leaves: Sequence[Tensor] | None = None) -> list[Tensor]:
    """Populate ``.grad`` on every gradient-requiring leaf that reaches ``loss``.

    Leaves of the record that do not reach ``loss`` keep ``grad = None``.
    Returns the requested ``leaves`` (or, if none were given, all
    gradient-requiring leaves of the record) that received no gradient.
    """
    if loss.values.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    _resolve(loss)
    rec = loss.record
    if rec is None:
        if loss.requires_grad:
            loss.grad = np.ones_like(loss.values)
            return []
        return list(leaves or [])
    grads: list = [None] * len(rec.values)
    grads[loss.node_id] = np.ones_like(loss.values)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        _backward_pass(rec, grads, rec.needs_grad, rec.producer[loss.node_id])
    for nid, leaf in rec.leaves.items():
        if leaf.requires_grad:
            leaf.grad = None if grads[nid] is None else np.array(grads[nid], dtype=np.float64)
    if leaves is None:
        candidates = [t for t in rec.leaves.values() if t.requires_grad]
    else:
        candidates = list(leaves)
    detached = [t for t in candidates if t.grad is None or id(t) not in rec._leaf_ids]
    for t in candidates:
        if id(t) not in rec._leaf_ids:
            t.grad = None
    if detached:
        logger.debug("backward: %d leaves received no gradient: %s", len(detached),
                     ", ".join(t.name or repr(t) for t in detached))
    return detached


def grad_check(function: Callable[[], Tensor], leaves: Sequence[Tensor], epsilon: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences.

    ``function`` rebuilds the scalar output from the current leaf values. The
    per-coordinate error is |a - n| / max(1e-8, |a| + |n|).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"grad_check: epsilon {epsilon} outside [1e-7, 1e-3]")
    out = function()
    if out.values.size != 1:
        raise ShapeError(f"grad_check: function output must be scalar, got shape {out.shape}")
    for leaf in leaves:
        leaf.grad = None
    backward(out, leaves)
    worst = 0.0
    for leaf in leaves:
        analytic = np.zeros(leaf.values.size) if leaf.grad is None else leaf.grad.reshape(-1)
        base = leaf.values
        for i in range(base.size):
            plus = base.copy()
            plus.reshape(-1)[i] += epsilon
            leaf.values = plus
            fp = function().item()
            minus = base.copy()
            minus.reshape(-1)[i] -= epsilon
            leaf.values = minus
            fm = function().item()
            leaf.values = base
            numeric = (fp - fm) / (2.0 * epsilon)
            a = analytic[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst


# --------------------------------------------------------------------------
# primitives


class Primitive:
    tag = ""
    arity: int | None = 1

    @staticmethod
    def check(*arrays, **attrs):
        pass

    @staticmethod
    def forward(*arrays, **attrs):
        raise NotImplementedError

    @staticmethod
    def backward(g, inputs, out, saved, want, **attrs):
        raise NotImplementedError


def _reduce_to(g, shape):
    """Sum a broadcast gradient back down to a suffix-aligned ``shape``."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    return g.reshape((-1,) + shape).sum(axis=0) if lead > 0 else g


def _suffix_broadcast(op, a, b):
    if a.shape == b.shape:
        return
    if b.ndim <= a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not conform "
                     "(second operand must equal the first or a trailing suffix of it)")


class Add(Primitive):
    tag, arity = "add", 2

    @staticmethod
    def check(a, b):
        _suffix_broadcast("add", a, b)

    @staticmethod
    def forward(a, b):
        return a + b, None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        return g, _reduce_to(g, inputs[1].shape) if want[1] else None


class Sub(Primitive):
    tag, arity = "sub", 2

    @staticmethod
    def check(a, b):
        _suffix_broadcast("sub", a, b)

    @staticmethod
    def forward(a, b):
        return a - b, None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        return g, -_reduce_to(g, inputs[1].shape) if want[1] else None


class Mul(Primitive):
    tag, arity = "mul", 2

    @staticmethod
    def check(a, b):
        _suffix_broadcast("mul", a, b)

    @staticmethod
    def forward(a, b):
        return a * b, None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        a, b = inputs
        ga = g * b if want[0] else None
        gb = _reduce_to(g * a, b.shape) if want[1] else None
        return ga, gb


class Affine(Primitive):
    """Elementwise ``scale * x + shift`` with constant scalars."""

    tag = "affine"

    @staticmethod
    def forward(x, scale=1.0, shift=0.0):
        return x * scale + shift, None

    @staticmethod
    def backward(g, inputs, out, saved, want, scale=1.0, shift=0.0):
        return (g * scale,)


class MatMul(Primitive):
    """``a @ b`` where ``a`` is (..., n, k) and ``b`` is (k, m) or (..., k, m)."""

    tag, arity = "matmul", 2

    @staticmethod
    def check(a, b):
        ok = a.ndim >= 2 and b.ndim >= 2 and a.shape[-1] == b.shape[-2]
        if ok and b.ndim > 2:
            ok = b.ndim == a.ndim and a.shape[:-2] == b.shape[:-2]
        if not ok:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    # 2-D right operands go through one flat GEMM; batched operands are made
    # contiguous before transposing, since strided batches take a slow path.

    @staticmethod
    def forward(a, b):
        if b.ndim == 2 and a.ndim > 2:
            return (a.reshape(-1, a.shape[-1]) @ b).reshape(a.shape[:-1] + (b.shape[1],)), None
        return np.matmul(a, b), None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        a, b = inputs
        ga = gb = None
        if b.ndim == 2:
            k, m = b.shape
            g2 = g.reshape(-1, m)
            if want[0]:
                ga = (g2 @ b.T).reshape(a.shape)
            if want[1]:
                gb = a.reshape(-1, k).T @ g2
        else:
            if want[0]:
                ga = np.matmul(g, np.ascontiguousarray(np.swapaxes(b, -1, -2)))
            if want[1]:
                gb = np.matmul(np.ascontiguousarray(np.swapaxes(a, -1, -2)), g)
        return ga, gb


class Sum(Primitive):
    tag = "sum"

    @staticmethod
    def forward(x):
        return np.array([x.sum()]), None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        return (np.full(inputs[0].shape, g[0]),)


class Mean(Primitive):
    """Mean over one axis (the pooling primitive)."""

    tag = "mean"

    @staticmethod
    def check(x, axis=-1):
        if not -x.ndim <= axis < x.ndim or x.shape[axis] == 0:
            raise ShapeError(f"mean: axis {axis} invalid for shape {x.shape}")

    @staticmethod
    def forward(x, axis=-1):
        return x.mean(axis=axis), None

    @staticmethod
    def backward(g, inputs, out, saved, want, axis=-1):
        x = inputs[0]
        n = x.shape[axis]
        return (np.broadcast_to(np.expand_dims(g / n, axis), x.shape).copy(),)


class SoftmaxTemp(Primitive):
    """softmax(x / tau) along the last axis."""

    tag = "softmax_temp"

    @staticmethod
    def check(x, tau=1.0):
        if not tau > 0:
            raise ValueError(f"softmax_temp: tau must be positive, got {tau}")
        if x.size == 0 or x.shape[-1] == 0:
            raise ShapeError(f"softmax_temp: empty logits of shape {x.shape}")

    @staticmethod
    def forward(x, tau=1.0):
        k = x.shape[-1]
        y = kernels.softmax_forward(np.ascontiguousarray(x.reshape(-1, k)), float(tau))
        return y.reshape(x.shape), None

    @staticmethod
    def backward(g, inputs, out, saved, want, tau=1.0):
        k = out.shape[-1]
        gx = kernels.softmax_backward(out.reshape(-1, k), np.ascontiguousarray(g.reshape(-1, k)), float(tau))
        return (gx.reshape(out.shape),)


class Sigmoid(Primitive):
    tag = "sigmoid"

    @staticmethod
    def forward(x):
        # split by sign so exp never overflows
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out, None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        return (g * out * (1.0 - out),)


class Relu(Primitive):
    tag = "relu"

    @staticmethod
    def forward(x):
        return np.maximum(x, 0.0), None

    @staticmethod
    def backward(g, inputs, out, saved, want):
        return (g * (inputs[0] > 0),)


class Concat(Primitive):
    tag, arity = "concat", None

    @staticmethod
    def check(*arrays, axis=0):
        if not arrays:
            raise ShapeError("concat: no inputs")
        ref = arrays[0]
        ax = axis % ref.ndim
        for a in arrays[1:]:
            if a.ndim != ref.ndim or any(a.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != ax):
                raise ShapeError(f"concat: shapes {ref.shape} and {a.shape} differ off axis {axis}")

    @staticmethod
    def forward(*arrays, axis=0):
        return np.concatenate(arrays, axis=axis), None

    @staticmethod
    def backward(g, inputs, out, saved, want, axis=0):
        bounds = np.cumsum([a.shape[axis] for a in inputs])[:-1]
        return [p if w else None for p, w in zip(np.split(g, bounds, axis=axis), want)]


class Expand(Primitive):
    """Broadcast ``x`` to ``lead + x.shape`` (new leading axes)."""

    tag = "expand"

    @staticmethod
    def forward(x, lead=()):
        return np.broadcast_to(x, tuple(lead) + x.shape).copy(), None

    @staticmethod
    def backward(g, inputs, out, saved, want, lead=()):
        return (g.reshape((-1,) + inputs[0].shape).sum(axis=0),)


class Reshape(Primitive):
    tag = "reshape"

    @staticmethod
    def check(x, shape=()):
        if int(np.prod(shape)) != x.size:
            raise ShapeError(f"reshape: cannot reshape {x.shape} to {tuple(shape)}")

    @staticmethod
    def forward(x, shape=()):
        return x.reshape(shape), None

    @staticmethod
    def backward(g, inputs, out, saved, want, shape=()):
        return (g.reshape(inputs[0].shape),)


class Transpose(Primitive):
    tag = "transpose"

    @staticmethod
    def forward(x, axes=()):
        return np.ascontiguousarray(np.transpose(x, axes)), None

    @staticmethod
    def backward(g, inputs, out, saved, want, axes=()):
        return (np.ascontiguousarray(np.transpose(g, np.argsort(axes))),)


class Index(Primitive):
    """Select entry ``index`` along axis 0."""

    tag = "index"

    @staticmethod
    def check(x, index=0):
        if not 0 <= index < x.shape[0]:
            raise IndexError(f"index: {index} out of range for leading extent {x.shape[0]}")

    @staticmethod
    def forward(x, index=0):
        return x[index].copy(), None

    @staticmethod
    def backward(g, inputs, out, saved, want, index=0):
        gx = np.zeros(inputs[0].shape)
        gx[index] = g
        return (gx,)


class SliceAxis(Primitive):
    """``x[start:stop]`` along ``axis``."""

    tag = "slice"

    @staticmethod
    def check(x, axis=0, start=0, stop=0):
        n = x.shape[axis]
        if not 0 <= start < stop <= n:
            raise ShapeError(f"slice: [{start}:{stop}] invalid for extent {n} of shape {x.shape}")

    @staticmethod
    def forward(x, axis=0, start=0, stop=0):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(start, stop)
        return np.ascontiguousarray(x[tuple(sl)]), None

    @staticmethod
    def backward(g, inputs, out, saved, want, axis=0, start=0, stop=0):
        x = inputs[0]
        gx = np.zeros(x.shape)
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(start, stop)
        gx[tuple(sl)] = g
        return (gx,)


class Embedding(Primitive):
    """Gather rows ``ids`` (any integer array) from a (V, D) table."""

    tag = "embedding"

    @staticmethod
    def check(table, ids=None):
        if table.ndim != 2:
            raise ShapeError(f"embedding: table must be 2-D, got {table.shape}")
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise IndexError(f"embedding: ids outside [0, {table.shape[0]})")

    @staticmethod
    def forward(table, ids=None):
        return table[ids], None

    @staticmethod
    def backward(g, inputs, out, saved, want, ids=None):
        table = inputs[0]
        flat = np.ascontiguousarray(ids.reshape(-1), dtype=np.int64)
        gy = np.ascontiguousarray(g.reshape(-1, table.shape[1]))
        return (kernels.embedding_backward(flat, gy, table.shape[0]),)


class LayerNorm(Primitive):
    tag, arity = "layer_norm", 3

    @staticmethod
    def check(x, gain, bias, eps=1e-5):
        d = x.shape[-1]
        if gain.shape != (d,) or bias.shape != (d,):
            raise ShapeError(f"layer_norm: x {x.shape} needs gain/bias of shape ({d},), "
                             f"got {gain.shape} and {bias.shape}")

    @staticmethod
    def forward(x, gain, bias, eps=1e-5):
        d = x.shape[-1]
        y, xhat, rstd = kernels.layer_norm_forward(np.ascontiguousarray(x.reshape(-1, d)), gain, bias, float(eps))
        return y.reshape(x.shape), (xhat, rstd)

    @staticmethod
    def backward(g, inputs, out, saved, want, eps=1e-5):
        x, gain, _ = inputs
        xhat, rstd = saved
        d = x.shape[-1]
        gx, ggain, gbias = kernels.layer_norm_backward(np.ascontiguousarray(g.reshape(-1, d)), xhat, rstd, gain)
        return gx.reshape(x.shape), ggain, gbias


class CrossEntropy(Primitive):
    """Mean cross-entropy of (N, C) logits against integer labels."""

    tag = "cross_entropy"

    @staticmethod
    def check(logits, labels=None):
        if logits.ndim != 2:
            raise ShapeError(f"cross_entropy: logits must be (N, C), got {logits.shape}")
        if labels.shape != (logits.shape[0],):
            raise ShapeError(f"cross_entropy: labels shape {labels.shape} vs logits {logits.shape}")
        if logits.shape[0] == 0:
            raise ShapeError("cross_entropy: empty batch")
        if labels.min() < 0 or labels.max() >= logits.shape[1]:
            raise ValueError(f"cross_entropy: label outside [0, {logits.shape[1]})")

    @staticmethod
    def forward(logits, labels=None):
        loss, probs = kernels.cross_entropy_forward(np.ascontiguousarray(logits), labels)
        return np.array([loss]), probs

    @staticmethod
    def backward(g, inputs, out, saved, want, labels=None):
        return (kernels.cross_entropy_backward(saved, labels, float(g[0])),)


PRIMITIVES: dict[str, type[Primitive]] = {
    p.tag: p
    for p in (Add, Sub, Mul, Affine, MatMul, Sum, Mean, SoftmaxTemp, Sigmoid, Relu, Concat,
              Expand, Reshape, Transpose, Index, SliceAxis, Embedding, LayerNorm, CrossEntropy)
}


# --------------------------------------------------------------------------
# functional surface


def add(a, b):
    return apply("add", a, b)


def sub(a, b):
    return apply("sub", a, b)


def mul(a, b):
    return apply("mul", a, b)


def affine(x, scale=1.0, shift=0.0):
    return apply("affine", x, scale=float(scale), shift=float(shift))


def one_minus(x):
    return affine(x, -1.0, 1.0)


def matmul(a, b):
    return apply("matmul", a, b)


def sum(x):  # noqa: A001 - mirrors the primitive name
    return apply("sum", x)


def mean(x, axis=-1):
    return apply("mean", x, axis=axis)


def softmax_temp(logits, tau=1.0):
    return apply("softmax_temp", logits, tau=float(tau))


def sigmoid(x):
    return apply("sigmoid", x)


def relu(x):
    return apply("relu", x)


def concat(tensors, axis=0):
    return apply("concat", *tensors, axis=axis)


def expand(x, lead):
    return apply("expand", x, lead=tuple(lead))


def reshape(x, shape):
    return apply("reshape", x, shape=tuple(shape))


def transpose(x, axes):
    return apply("transpose", x, axes=tuple(axes))


def index(x, i):
    return apply("index", x, index=int(i))


def slice_axis(x, axis, start, stop):
    return apply("slice", x, axis=int(axis), start=int(start), stop=int(stop))


def embedding(table, ids):
    return apply("embedding", table, ids=np.asarray(ids, dtype=np.int64))


def layer_norm(x, gain, bias, eps=1e-5):
    return apply("layer_norm", x, gain, bias, eps=float(eps))


def cross_entropy(logits, labels):
    return apply("cross_entropy", logits, labels=np.ascontiguousarray(labels, dtype=np.int64))


def constant(values, name=None):
    return Tensor(values, requires_grad=False, name=name)


def parameter(values, name=None):
    return Tensor(values, requires_grad=True, name=name)
