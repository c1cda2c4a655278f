"""Flat ``key = value`` experiment configuration.

Keys are dotted: ``seed``, ``suite.*``, ``train.*``, ``encoder.*``,
``transfer.*``, ``baseline.*``, ``sweep.*``. Blank lines and ``#`` comments
are ignored. Every value is typed by its default, so ``train.steps = 1.5``
is a field-level error rather than a silent cast.

``resolved_text`` writes every key with its effective value; feeding that
text back through ``parse_config`` gives an equal config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace

from .model import EncoderConfig
from .tasks import PROFILES
from .trainer import TrainConfig


class ConfigError(ValueError):
    """Bad config file or value; the message names the offending key."""


@dataclass(frozen=True)
class SuiteConfig:
    T: int = 8
    profile: str = "conflict"
    n_heldout: int = 2
    seq_len: int = 12
    n_train: int = 256
    n_val: int = 128
    n_test: int = 128


@dataclass(frozen=True)
class TransferConfig:
    # adaptation of held-out tasks; identical for the scheduled and baseline models
    steps: int = 200
    batch_size: int = 64
    learning_rate: float = 3e-3


@dataclass(frozen=True)
class BaselineConfig:
    # shared-prompt reference model: K prompts, gate pinned to 1 when pin_gate
    K: int = 1
    pin_gate: bool = True


@dataclass(frozen=True)
class SweepConfig:
    temperatures: tuple = (0.5, 0.7, 0.9, 1.1, 1.3)
    task_counts: tuple = (2, 4, 8, 12, 16)
    repeats: int = 5


_TRAIN_SKIP = ("seed", "encoder")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def train_config(self, **overrides) -> TrainConfig:
        """The TrainConfig actually handed to the trainer (seed and encoder folded in)."""
        return replace(self.train, seed=self.seed, encoder=self.encoder, **overrides)

    def validate(self):
        s = self.suite
        if s.profile not in PROFILES:
            raise ConfigError(f"suite.profile: unknown profile {s.profile!r}; expected one of {sorted(PROFILES)}")
        for name in ("T", "n_train", "n_val", "n_test"):
            if getattr(s, name) < 1:
                raise ConfigError(f"suite.{name}: must be >= 1, got {getattr(s, name)}")
        if s.n_heldout < 0:
            raise ConfigError(f"suite.n_heldout: must be >= 0, got {s.n_heldout}")
        if s.seq_len < 8:
            raise ConfigError(f"suite.seq_len: must be >= 8, got {s.seq_len}")
        if s.seq_len + self.encoder.m > self.encoder.max_len:
            raise ConfigError(f"suite.seq_len: {s.seq_len} tokens + {self.encoder.m} prompt slots "
                              f"exceed encoder.max_len={self.encoder.max_len}")
        for name in ("steps", "batch_size"):
            if getattr(self.transfer, name) < 1:
                raise ConfigError(f"transfer.{name}: must be >= 1, got {getattr(self.transfer, name)}")
        if not self.transfer.learning_rate > 0:
            raise ConfigError(f"transfer.learning_rate: must be > 0, got {self.transfer.learning_rate}")
        if self.baseline.K < 1:
            raise ConfigError(f"baseline.K: must be >= 1, got {self.baseline.K}")
        if self.sweep.repeats < 1:
            raise ConfigError(f"sweep.repeats: must be >= 1, got {self.sweep.repeats}")
        check_grid("sweep.temperatures", self.sweep.temperatures, positive=True)
        check_grid("sweep.task_counts", self.sweep.task_counts, integer=True)
        if self.train.pin_schedule and self.train.K != s.T:
            raise ConfigError(f"train.pin_schedule: needs train.K == suite.T, got K={self.train.K}, T={s.T}")
        try:
            self.train_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


def check_grid(key, grid, positive=False, integer=False):
    if len(grid) == 0:
        raise ConfigError(f"{key}: grid is empty")
    for v in grid:
        if integer and (not isinstance(v, int) or isinstance(v, bool)):
            raise ConfigError(f"{key}: grid value {v!r} is not an integer")
        if integer and v < 1:
            raise ConfigError(f"{key}: grid value {v} must be >= 1")
        if positive and not v > 0:
            raise ConfigError(f"{key}: grid value {v!r} must be > 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{key}: grid must be strictly increasing, got {list(grid)}")


# --------------------------------------------------------------------------
# key table


def _sections():
    """(prefix, dataclass type, attribute on ExperimentConfig, skipped fields)."""
    return [
        ("suite.", SuiteConfig, "suite", ()),
        ("train.", TrainConfig, "train", _TRAIN_SKIP),
        ("encoder.", EncoderConfig, "encoder", ()),
        ("transfer.", TransferConfig, "transfer", ()),
        ("baseline.", BaselineConfig, "baseline", ()),
        ("sweep.", SweepConfig, "sweep", ()),
    ]


def _keys(cfg: ExperimentConfig):
    yield "seed", cfg.seed
    for prefix, _, attr, skip in _sections():
        section = getattr(cfg, attr)
        for f in fields(section):
            if f.name not in skip:
                yield prefix + f.name, getattr(section, f.name)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _parse_scalar(key, text, like):
    if isinstance(like, bool):
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {text!r}")
    if isinstance(like, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(like, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return text


def _parse_value(key, text, like):
    if isinstance(like, tuple):
        items = [x.strip() for x in text.split(",") if x.strip()]
        elem = like[0] if like else 0.0
        if isinstance(elem, int) and not isinstance(elem, bool):
            # integer grids reject 2.5 here so the message names the key
            return tuple(_parse_scalar(key, x, 0) for x in items)
        return tuple(_parse_scalar(key, x, elem) for x in items)
    return _parse_scalar(key, text, like)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse config text on top of ``base`` (defaults if omitted) and validate."""
    cfg = base or ExperimentConfig()
    known = dict(_keys(cfg))
    updates: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in updates:
            raise ConfigError(f"{key}: set twice (line {lineno})")
        updates[key] = _parse_value(key, value, known[key])
    return validate(with_updates(cfg, updates))


def with_updates(cfg: ExperimentConfig, updates: dict) -> ExperimentConfig:
    """Apply ``{dotted key: typed value}`` without validating."""
    if "seed" in updates:
        cfg = replace(cfg, seed=updates["seed"])
    for prefix, _, attr, _ in _sections():
        section = {k[len(prefix):]: v for k, v in updates.items() if k.startswith(prefix)}
        if section:
            try:
                cfg = replace(cfg, **{attr: replace(getattr(cfg, attr), **section)})
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    return cfg


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    try:
        return cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def resolved_text(cfg: ExperimentConfig) -> str:
    """Every key with its effective value, one per line, in a fixed order."""
    lines = ["# resolved configuration; every key is listed with its effective value"]
    lines += [f"{k} = {_format(v)}" for k, v in _keys(cfg)]
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    body = "\n".join(f"{k}={_format(v)}" for k, v in _keys(cfg))
    return hashlib.sha256(body.encode()).hexdigest()[:16]
