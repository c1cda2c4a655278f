import numpy as np
import pytest

from promptsched import checkpoint
from promptsched.model import EncoderConfig, PromptedModel


def _model(seed=0):
    cfg = EncoderConfig(vocab_size=8, d=8, n_layers=1, n_heads=2, m=2, max_len=10)
    return PromptedModel.create(cfg, [2, 3], K=3, tau=0.9, seed=seed)


def test_round_trip_is_bit_exact(tmp_path):
    model = _model()
    params = model.named_parameters()
    rng = np.random.default_rng(0)
    for p in params.values():  # awkward values: subnormals, negative zero, extremes
        p.values = p.values + rng.normal(size=p.shape)
    params["heads.0"].values = np.array([[5e-324, -0.0, 1.7976931348623157e308], [-1e-310, 0.1, 1 / 3]])
    checkpoint.save_checkpoint(tmp_path, params, "abc123", step=17)
    arrays, meta = checkpoint.load_checkpoint(tmp_path)
    assert meta["config_hash"] == "abc123" and meta["step"] == 17
    for name, p in params.items():
        assert arrays[name].shape == p.values.shape
        assert arrays[name].tobytes() == p.values.tobytes()


def test_restore_into_fresh_model(tmp_path):
    a, b = _model(0), _model(1)
    checkpoint.save_checkpoint(tmp_path, a.named_parameters(), "h", 0)
    arrays, _ = checkpoint.load_checkpoint(tmp_path)
    checkpoint.restore_into(b.named_parameters(), arrays)
    for name, p in a.named_parameters().items():
        assert b.named_parameters()[name].values.tobytes() == p.values.tobytes()


def test_binary_layout_is_little_endian_float64(tmp_path):
    checkpoint.save_checkpoint(tmp_path, {"w": np.array([[1.0, 2.0]])}, "h", 0)
    raw = (tmp_path / "w.bin").read_bytes()
    assert raw == np.array([1.0, 2.0], dtype="<f8").tobytes()
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "param.w=1,2" in manifest and "config_hash=h" in manifest and "step=0" in manifest


def test_corrupt_checkpoints_are_rejected(tmp_path):
    checkpoint.save_checkpoint(tmp_path, {"w": np.zeros(4)}, "h", 0)
    (tmp_path / "w.bin").write_bytes(b"\0" * 8)
    with pytest.raises(checkpoint.CheckpointError, match="manifest shape"):
        checkpoint.load_checkpoint(tmp_path)
    with pytest.raises(checkpoint.CheckpointError, match="cannot read"):
        checkpoint.load_checkpoint(tmp_path / "nowhere")
    with pytest.raises(checkpoint.CheckpointError, match="lacks"):
        checkpoint.restore_into({"v": None}, {})
