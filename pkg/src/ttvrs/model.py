"""Model bundle and binary checkpoint IO.

Checkpoint layout: magic "TTVRS1", then for each named tensor in sorted
name order: uint32 name length, name bytes (utf-8), uint32 rank, uint32
dims, then the little-endian float32 payload. Model dimensions and a few
run scalars travel as rank-0/rank-1 "meta.*" tensors in the same stream.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .decoder import MaskDecoder
from .encoder import Encoder, ModelConfig
from .errors import MissingArtifactError, ValidationError
from .memory import MemoryAttention, MemoryEncoder

CHECKPOINT_MAGIC = b"TTVRS1"

_DIM_FIELDS = (
    "frame_height",
    "frame_width",
    "feat_channels",
    "raw_token_dim",
    "token_dim",
    "query_emb_dim",
    "text_context_dim",
    "vocab_size",
    "answer_len",
    "max_frame_slots",
    "projection_layers",
)


class SegModel(nn.Module):
    """Encoder, mask decoder, memory encoder, and memory attention."""

    def __init__(self, config: ModelConfig | None = None, threshold: float = 0.5):
        super().__init__()
        self.config = config or ModelConfig()
        self.encoder = Encoder(self.config)
        self.decoder = MaskDecoder(self.config, threshold=threshold)
        self.memory_encoder = MemoryEncoder(self.config)
        self.memory_attention = MemoryAttention(self.config)

    def init_seeded(self, seed: int) -> "SegModel":
        """Uniform [-0.1, 0.1] init of every parameter, in sorted name order."""
        gen = torch.Generator().manual_seed(seed)
        for _, param in sorted(self.named_parameters(), key=lambda kv: kv[0]):
            with torch.no_grad():
                param.uniform_(-0.1, 0.1, generator=gen)
        return self


def _write_tensor(fh, name: str, array: np.ndarray) -> None:
    # np.asarray (not ascontiguousarray) so rank-0 tensors keep their rank.
    data = np.asarray(array, dtype="<f4")
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<I", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<I", data.ndim))
    for dim in data.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(data.tobytes(order="C"))


def save_checkpoint(model: SegModel, path: str | Path, meta: dict | None = None) -> None:
    """Serialize parameters plus meta scalars; byte-deterministic."""
    tensors: dict[str, np.ndarray] = {
        name: param.detach().cpu().numpy() for name, param in model.named_parameters()
    }
    tensors["meta.dims"] = np.array(
        [getattr(model.config, f) for f in _DIM_FIELDS], dtype=np.float32
    )
    tensors["meta.threshold"] = np.float32(model.decoder.threshold)
    for key, value in (meta or {}).items():
        tensors[f"meta.{key}"] = np.asarray(value, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name in sorted(tensors):
            _write_tensor(fh, name, np.asarray(tensors[name]))


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValidationError("truncated checkpoint")
    return data


def read_checkpoint_tensors(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    tensors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ValidationError(f"{path} is not a {CHECKPOINT_MAGIC.decode()} checkpoint")
        while True:
            head = fh.read(4)
            if not head:
                break
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4))[0] for _ in range(rank)
            )
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            payload = _read_exact(fh, 4 * count)
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return tensors


def load_checkpoint(path: str | Path) -> tuple[SegModel, dict]:
    """Rebuild a SegModel from a checkpoint; returns (model, meta scalars)."""
    tensors = read_checkpoint_tensors(path)
    if "meta.dims" not in tensors:
        raise ValidationError("checkpoint is missing meta.dims")
    dims = tensors["meta.dims"]
    config = ModelConfig(**{f: int(v) for f, v in zip(_DIM_FIELDS, dims)})
    threshold = float(tensors.get("meta.threshold", np.float32(0.5)))
    model = SegModel(config, threshold=threshold)
    meta = {
        name[len("meta."):]: (t.copy() if t.ndim else float(t))
        for name, t in tensors.items()
        if name.startswith("meta.") and name not in ("meta.dims",)
    }
    params = dict(model.named_parameters())
    missing = sorted(set(params) - set(tensors))
    if missing:
        raise ValidationError(f"checkpoint is missing tensors: {missing[:3]}...")
    for name, param in params.items():
        stored = tensors[name]
        if tuple(stored.shape) != tuple(param.shape):
            raise ValidationError(
                f"checkpoint tensor {name} has shape {stored.shape}, expected {tuple(param.shape)}"
            )
        with torch.no_grad():
            param.copy_(torch.from_numpy(stored))
    return model, meta
