"""Synthetic multi-task sequence classification suites.

Each task labels fixed-length token sequences with one rule from a small
family:

``presence``    1 if the designated token occurs
``majority``    1 if token a occurs more often than token b
``parity``      parity of the count of a marked token
``first_last``  1 if the first token id is smaller than the last

Inputs are planted per example so every task is class balanced. Under a
conflict profile, pairs of tasks share one input set: labels are drawn
independently for both members and both rules are planted into the same
sequence, so the two tasks disagree on roughly half of their shared inputs
and compete for the same positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import rng_for

RULE_KINDS = ("presence", "majority", "parity", "first_last")
TOKEN_RULES = ("presence", "majority", "parity")
N_DESIGNATED = {"presence": 1, "majority": 2, "parity": 1, "first_last": 0}

# conflicting pairs per group of this many tasks
PROFILES = {"conflict": 4, "dense": 2}


@dataclass(frozen=True)
class Rule:
    kind: str
    tokens: tuple = ()

    def label(self, seq) -> int:
        seq = list(seq)
        if self.kind == "presence":
            return int(self.tokens[0] in seq)
        if self.kind == "majority":
            return int(seq.count(self.tokens[0]) > seq.count(self.tokens[1]))
        if self.kind == "parity":
            return seq.count(self.tokens[0]) % 2
        if self.kind == "first_last":
            return int(seq[0] < seq[-1])
        raise ValueError(f"unknown rule kind {self.kind!r}")


@dataclass
class Split:
    tokens: np.ndarray  # (N, L) int64
    labels: np.ndarray  # (N,) int64

    def __len__(self):
        return len(self.labels)


@dataclass
class Task:
    name: str
    rule: Rule
    n_classes: int
    train: Split
    val: Split
    test: Split
    conflict_group: int | None
    uid: int


@dataclass
class TaskSuite:
    tasks: list
    seed: int
    profile: str
    seq_len: int
    vocab_size: int
    heldout: list = field(default_factory=list)

    @property
    def T(self):
        return len(self.tasks)

    def subset(self, indices) -> "TaskSuite":
        return replace(self, tasks=[self.tasks[i] for i in indices], heldout=[])

    def conflict_pairs(self):
        groups: dict[int, list[int]] = {}
        for i, t in enumerate(self.tasks):
            if t.conflict_group is not None:
                groups.setdefault(t.conflict_group, []).append(i)
        return [tuple(v) for _, v in sorted(groups.items()) if len(v) > 1]


def _plant(rule: Rule, label: int, seq: np.ndarray, free: list, rng) -> None:
    """Write ``rule``'s designated tokens into ``seq`` so it yields ``label``.

    ``free`` holds interior positions still available; used ones are removed.
    """
    def take(n):
        picks = [free.pop(int(rng.integers(len(free)))) for _ in range(n)]
        return picks

    if rule.kind == "presence":
        for p in take(int(rng.integers(1, 3)) if label else 0):
            seq[p] = rule.tokens[0]
    elif rule.kind == "parity":
        count = int(rng.choice([1, 3])) if label else int(rng.choice([0, 2]))
        for p in take(count):
            seq[p] = rule.tokens[0]
    elif rule.kind == "majority":
        lo = int(rng.integers(0, 2))
        hi = lo + int(rng.integers(1, 3))
        n_a, n_b = (hi, lo) if label else (lo, hi)
        for p in take(n_a):
            seq[p] = rule.tokens[0]
        for p in take(n_b):
            seq[p] = rule.tokens[1]
    elif rule.kind == "first_last":
        # callers guarantee seq[0] != seq[-1]
        lo, hi = min(seq[0], seq[-1]), max(seq[0], seq[-1])
        seq[0], seq[-1] = (lo, hi) if label else (hi, lo)
    else:
        raise ValueError(f"unknown rule kind {rule.kind!r}")


def _examples(rules, n, seq_len, vocab_size, rng, seen):
    """n distinct sequences with one planted label per rule."""
    designated = {tok for r in rules for tok in r.tokens}
    filler = np.array([v for v in range(vocab_size) if v not in designated])
    tokens = np.empty((n, seq_len), dtype=np.int64)
    labels = np.empty((len(rules), n), dtype=np.int64)
    i = 0
    while i < n:
        seq = filler[rng.integers(len(filler), size=seq_len)]
        if seq[0] == seq[-1]:
            continue
        free = list(range(1, seq_len - 1))
        ys = [int(rng.integers(2)) for _ in rules]
        for rule, y in zip(rules, ys):
            _plant(rule, y, seq, free, rng)
        key = seq.tobytes()
        if key in seen:
            continue
        seen.add(key)
        tokens[i] = seq
        for r, rule in enumerate(rules):
            labels[r, i] = rule.label(seq)
        i += 1
    return tokens, labels


def _draw_rule(kind, rng, vocab_size, used):
    k = N_DESIGNATED[kind]
    pool = [v for v in range(vocab_size) if v not in used]
    toks = tuple(int(t) for t in rng.choice(pool, size=k, replace=False)) if k else ()
    used.update(toks)
    return Rule(kind, toks)


def _related_rule(kind, rng, train_rules, vocab_size, used):
    """Held-out rule over tokens the training tasks already designate.

    New tasks then differ from every training task (a new kind/token pairing)
    while sharing input structure with them. Falls back to fresh tokens when
    the training tasks designate too few.
    """
    k = N_DESIGNATED[kind]
    taken = {(r.kind, r.tokens) for r in train_rules}
    seen = sorted({tok for r in train_rules for tok in r.tokens})
    for _ in range(32):
        if k == 0 or len(seen) < k:
            break
        toks = tuple(int(t) for t in rng.choice(seen, size=k, replace=False))
        if (kind, toks) not in taken:
            return Rule(kind, toks)
    return _draw_rule(kind, rng, vocab_size, used if kind != "first_last" else set())


def generate_tasks(T: int, seed: int, profile: str = "conflict", n_heldout: int = 0,
                   seq_len: int = 12, vocab_size: int = 64,
                   n_train: int = 256, n_val: int = 128, n_test: int = 128) -> TaskSuite:
    """Deterministic suite of ``T`` training tasks plus ``n_heldout`` extra tasks.

    Under ``profile`` with group size g, the first two tasks of every full
    group of g tasks form a conflicting pair sharing their inputs. Held-out
    rules reuse tokens designated by the training tasks.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown task profile {profile!r}; expected one of {sorted(PROFILES)}")
    if T < 1 or n_heldout < 0:
        raise ValueError(f"generate_tasks: need T >= 1 and n_heldout >= 0, got T={T}, n_heldout={n_heldout}")
    if seq_len < 8:
        raise ValueError(f"generate_tasks: seq_len must be at least 8, got {seq_len}")
    group = PROFILES[profile]
    rng = rng_for(seed, "suite", profile)
    total = T + n_heldout
    pairs = {}
    if T >= 4:
        for g0 in range(0, T - group + 1, group):
            pairs[g0] = g0 + 1
    kinds, rules, used = [], [], set()
    for i in range(total):
        kind = RULE_KINDS[(i + seed) % len(RULE_KINDS)]
        if i in pairs or i - 1 in pairs:
            kind = TOKEN_RULES[(i // 2 + seed) % len(TOKEN_RULES)] if i in pairs else kinds[i - 1]
        kinds.append(kind)
        if i >= T:
            rules.append(_related_rule(kind, rng, rules[:T], vocab_size, used))
        else:
            rules.append(_draw_rule(kind, rng, vocab_size, used if kind != "first_last" else set()))
    sizes = (n_train, n_val, n_test)
    seen: set = set()
    out = []
    i = 0
    while i < total:
        members = [i, pairs[i]] if i in pairs else [i]
        data_rng = rng_for(seed, "data", i)
        splits = [_examples([rules[j] for j in members], n, seq_len, vocab_size, data_rng, seen)
                  for n in sizes]
        for r, j in enumerate(members):
            sp = [Split(tok.copy(), lab[r].copy()) for tok, lab in splits]
            out.append(Task(
                name=f"task{j}_{rules[j].kind}",
                rule=rules[j],
                n_classes=2,
                train=sp[0], val=sp[1], test=sp[2],
                conflict_group=i if len(members) > 1 else None,
                uid=int(rng_for(seed, "uid", j).integers(2**31)),
            ))
        i += len(members)
    return TaskSuite(out[:T], seed, profile, seq_len, vocab_size, heldout=out[T:])


def disagreement(a: Task, b: Task) -> int:
    """Number of shared input sequences on which ``a`` and ``b`` disagree."""
    count = 0
    for name in ("train", "val", "test"):
        sa, sb = getattr(a, name), getattr(b, name)
        index = {row.tobytes(): y for row, y in zip(sb.tokens, sb.labels)}
        for row, y in zip(sa.tokens, sa.labels):
            other = index.get(row.tobytes())
            if other is not None and other != y:
                count += 1
    return count
