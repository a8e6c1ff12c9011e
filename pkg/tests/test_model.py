import numpy as np
import pytest
import torch

from ttvrs.encoder import ModelConfig
from ttvrs.errors import MissingArtifactError, ValidationError
from ttvrs.model import (
    CHECKPOINT_MAGIC,
    SegModel,
    load_checkpoint,
    read_checkpoint_tensors,
    save_checkpoint,
)

MICRO = ModelConfig(
    frame_height=8,
    frame_width=8,
    feat_channels=4,
    raw_token_dim=8,
    token_dim=6,
    query_emb_dim=4,
    text_context_dim=8,
)


def test_init_seeded_is_reproducible_and_bounded():
    a = SegModel(MICRO).init_seeded(5)
    b = SegModel(MICRO).init_seeded(5)
    c = SegModel(MICRO).init_seeded(6)
    names = [n for n, _ in a.named_parameters()]
    pa, pb, pc = (dict(m.named_parameters()) for m in (a, b, c))
    assert all(torch.equal(pa[n], pb[n]) for n in names)
    assert any(not torch.equal(pa[n], pc[n]) for n in names)
    for n in names:
        assert pa[n].abs().max().item() <= 0.1


def test_checkpoint_roundtrip_restores_parameters(tmp_path):
    model = SegModel(MICRO, threshold=0.4).init_seeded(1)
    path = tmp_path / "m.ttvrs"
    save_checkpoint(model, path, meta={"alpha": 0.25, "memory_capacity": 3})
    loaded, meta = load_checkpoint(path)
    assert loaded.config == MICRO
    assert loaded.decoder.threshold == pytest.approx(0.4)
    assert meta["alpha"] == pytest.approx(0.25)
    assert meta["memory_capacity"] == pytest.approx(3.0)
    for (name, p), (_, q) in zip(model.named_parameters(), loaded.named_parameters()):
        assert torch.equal(p, q), name


def test_checkpoint_bytes_deterministic(tmp_path):
    model = SegModel(MICRO).init_seeded(2)
    save_checkpoint(model, tmp_path / "a.ttvrs", meta={"alpha": 0.1})
    save_checkpoint(model, tmp_path / "b.ttvrs", meta={"alpha": 0.1})
    assert (tmp_path / "a.ttvrs").read_bytes() == (tmp_path / "b.ttvrs").read_bytes()


def test_checkpoint_magic_and_layout(tmp_path):
    model = SegModel(MICRO).init_seeded(3)
    path = tmp_path / "m.ttvrs"
    save_checkpoint(model, path)
    raw = path.read_bytes()
    assert raw.startswith(CHECKPOINT_MAGIC)
    tensors = read_checkpoint_tensors(path)
    assert "meta.dims" in tensors and "meta.threshold" in tensors
    assert tensors["encoder.conv1.weight"].shape == (2, 6, 3, 3)
    assert tensors["encoder.conv1.weight"].dtype == np.float32


def test_missing_checkpoint_raises_missing_artifact(tmp_path):
    with pytest.raises(MissingArtifactError):
        read_checkpoint_tensors(tmp_path / "nope.ttvrs")


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ttvrs"
    path.write_bytes(b"NOTCKPTxxxx")
    with pytest.raises(ValidationError):
        read_checkpoint_tensors(path)


def test_truncated_checkpoint_rejected(tmp_path):
    model = SegModel(MICRO).init_seeded(4)
    path = tmp_path / "m.ttvrs"
    save_checkpoint(model, path)
    (tmp_path / "cut.ttvrs").write_bytes(path.read_bytes()[:-7])
    with pytest.raises(ValidationError):
        read_checkpoint_tensors(tmp_path / "cut.ttvrs")
