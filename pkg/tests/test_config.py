import pytest

from promptsched.config import (ConfigError, ExperimentConfig, config_hash, load_config, parse_config,
                                resolved_text)


def test_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert cfg.train.K == 4 and cfg.train.learning_rate == 3e-3 and cfg.transfer.steps == 200


def test_parse_overrides_and_comments():
    cfg = parse_config("""
        # comment
        seed = 7
        suite.T = 5          # trailing comment
        train.freeze_backbone = true
        train.tau = 1.1
        encoder.d = 16
        sweep.temperatures = 0.5, 1.0
        sweep.task_counts = 2, 3
    """)
    assert cfg.seed == 7 and cfg.suite.T == 5 and cfg.train.freeze_backbone is True
    assert cfg.train.tau == 1.1 and cfg.encoder.d == 16
    assert cfg.sweep.temperatures == (0.5, 1.0) and cfg.sweep.task_counts == (2, 3)
    assert cfg.train_config().seed == 7 and cfg.train_config().encoder.d == 16


@pytest.mark.parametrize("text, key", [
    ("train.steps = 1.5", "train.steps"),
    ("train.bogus = 1", "train.bogus"),
    ("train.tau = -1", "tau"),
    ("train.freeze_backbone = maybe", "train.freeze_backbone"),
    ("suite.profile = nope", "suite.profile"),
    ("encoder.n_heads = 3", "divisible"),
    ("sweep.temperatures = 0.9, 0.5", "sweep.temperatures"),
    ("sweep.temperatures = 0.0, 0.5", "sweep.temperatures"),
    ("sweep.task_counts = 2, 4.5", "sweep.task_counts"),
    ("sweep.task_counts = ", "sweep.task_counts"),
    ("train.pin_schedule = true", "pin_schedule"),
    ("suite.seq_len = 40", "max_len"),
    ("seed = 1\nseed = 2", "seed"),
    ("just words", "line 1"),
])
def test_field_level_diagnostics(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


def test_resolved_echo_round_trips():
    cfg = parse_config("seed = 3\nsuite.T = 6\ntrain.tau = 0.7\ntrain.logits_lr_scale = 10\n")
    again = parse_config(resolved_text(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)
    assert resolved_text(again) == resolved_text(cfg)


def test_echo_lists_every_key():
    text = resolved_text(ExperimentConfig())
    keys = [line.split(" = ")[0] for line in text.splitlines() if not line.startswith("#")]
    assert "train.adam_beta1" in keys and "transfer.steps" in keys and "baseline.pin_gate" in keys
    assert len(keys) == len(set(keys))


def test_hash_changes_with_any_value():
    a = ExperimentConfig()
    b = parse_config("train.steps = 301")
    assert config_hash(a) != config_hash(b)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.conf")
