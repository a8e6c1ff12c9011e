"""FIFO memory bank and mask propagation.

The keyframe is decoded directly from its features (no memory
conditioning). Its prediction is encoded together with the features into a
memory entry; every further frame is decoded from features conditioned on
the bank through per-location dot-product attention, and its own
prediction is pushed back into the bank. The bank is a bounded FIFO queue:
oldest entries are evicted first.

Predictions enter the bank as sigmoid probabilities rather than hard
masks, keeping the propagation path differentiable end to end; binary
masks are the saturated special case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .aggregation import FusedToken
from .decoder import MaskDecoder, binarize, decode
from .encoder import Encoder, ModelConfig, encode_frames
from .errors import ValidationError
from .synthetic import Masklet, VideoClip

PROPAGATION_MODES = ("train_adjacent", "full_video")


class MemoryEncoder(nn.Module):
    """Fuses a frame's feature map with its (downsampled) predicted mask."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.feat_channels
        self.fuse = nn.Conv2d(c + 1, c, kernel_size=3, padding=1)


class MemoryAttention(nn.Module):
    """Single-head dot-product attention from frame locations to memories."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.feat_channels
        self.query_proj = nn.Linear(c, c, bias=False)
        self.key_proj = nn.Linear(c, c, bias=False)
        self.value_proj = nn.Linear(c, c, bias=False)


@dataclass
class MemoryEntry:
    frame_index: int
    memory: torch.Tensor  # (C, h, w)


@dataclass
class MemoryBank:
    """Ordered FIFO store of encoded memories; oldest evicted first."""

    capacity: int = 4
    entries: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValidationError("memory bank capacity must be >= 1")

    def push(self, entry: MemoryEntry) -> None:
        self.entries.append(entry)
        if len(self.entries) > self.capacity:
            del self.entries[0]

    def __len__(self) -> int:
        return len(self.entries)


def downsample_mask(mask: torch.Tensor, stride: int) -> torch.Tensor:
    """Block-mean downsample of a (H, W) mask by `stride` (exact area pooling)."""
    h, w = mask.shape
    if h % stride or w % stride:
        raise ValidationError(f"mask shape {mask.shape} not divisible by stride {stride}")
    return mask.reshape(h // stride, stride, w // stride, stride).mean(dim=(1, 3))


def encode_memory(
    features: torch.Tensor,
    mask: torch.Tensor | np.ndarray,
    mem_encoder: MemoryEncoder,
    frame_index: int = 0,
) -> MemoryEntry:
    """Encode (features, full-resolution mask) into one memory entry."""
    cfg = mem_encoder.cfg
    if features.ndim != 3 or features.shape[0] != cfg.feat_channels:
        raise ValidationError(f"expected ({cfg.feat_channels}, h, w) features, got {tuple(features.shape)}")
    if isinstance(mask, np.ndarray):
        mask = torch.from_numpy(np.ascontiguousarray(mask)).to(features.dtype)
    mask = mask.to(features.dtype)
    if tuple(mask.shape) != (features.shape[1] * cfg.stride, features.shape[2] * cfg.stride):
        raise ValidationError(f"mask shape {tuple(mask.shape)} does not match features at stride {cfg.stride}")
    low = downsample_mask(mask, cfg.stride)
    stacked = torch.cat([features, low.unsqueeze(0)], dim=0)
    out = torch.tanh(mem_encoder.fuse(stacked.unsqueeze(0))).squeeze(0)
    return MemoryEntry(frame_index=frame_index, memory=out)


def attend(features: torch.Tensor, bank: MemoryBank, attention: MemoryAttention) -> torch.Tensor:
    """Condition a feature map on the bank; an empty bank is the identity.

    Values are projected from each memory's offset against the newest
    entry (location-wise), so a bank whose memories are all identical
    contributes exactly zero. That makes propagation provably repeat the
    keyframe mask on a static video: identical inputs keep producing
    identical memories, which keep contributing nothing.
    """
    if len(bank) == 0:
        return features
    c, h, w = features.shape
    locs = features.reshape(c, h * w).transpose(0, 1)              # (hw, C)
    mems = torch.cat([e.memory.reshape(c, -1) for e in bank.entries], dim=1).transpose(0, 1)
    newest = bank.entries[-1].memory.reshape(c, -1).transpose(0, 1)
    offsets = mems - newest.repeat(len(bank), 1)
    q = attention.query_proj(locs)
    k = attention.key_proj(mems)
    v = attention.value_proj(offsets)
    weights = torch.softmax(q @ k.transpose(0, 1) / math.sqrt(c), dim=1)
    out = locs + weights @ v
    return out.transpose(0, 1).reshape(c, h, w)


def propagation_order(num_frames: int, keyframe: int, mode: str) -> list[int]:
    """Non-keyframe visiting order.

    full_video alternates outward from the keyframe (k+1, k-1, k+2, ...).
    train_adjacent takes the two nearest frames, shifted inward when the
    keyframe sits at a clip boundary; clips shorter than three frames
    yield as many as exist.
    """
    if mode not in PROPAGATION_MODES:
        raise ValidationError(f"unknown propagation mode {mode!r}")
    if not 0 <= keyframe < num_frames:
        raise ValidationError(f"keyframe {keyframe} outside [0, {num_frames})")
    if mode == "train_adjacent":
        if 0 < keyframe < num_frames - 1:
            return [keyframe + 1, keyframe - 1]
        if keyframe == 0:
            return [i for i in (1, 2) if i < num_frames]
        return [i for i in (num_frames - 2, num_frames - 3) if i >= 0]
    order: list[int] = []
    for step in range(1, num_frames):
        for idx in (keyframe + step, keyframe - step):
            if 0 <= idx < num_frames:
                order.append(idx)
    return order


@dataclass
class PropagationResult:
    masklet: Masklet
    occlusion_scores: np.ndarray          # (T,), zeros where not decoded
    keyframe: int
    frame_logits: dict                    # frame index -> (H, W) logits tensor
    frame_occlusions: dict                # frame index -> scalar tensor
    bank: MemoryBank


def propagate(
    clip: VideoClip,
    keyframe: int,
    fused: FusedToken,
    encoder: Encoder,
    decoder: MaskDecoder,
    mem_encoder: MemoryEncoder,
    attention: MemoryAttention,
    mode: str = "full_video",
    capacity: int = 4,
    threshold: float | None = None,
) -> PropagationResult:
    """Decode the keyframe, then roll the mask outward through the bank.

    The keyframe decode sees no memory; every decoded frame's soft
    prediction is pushed into the FIFO bank before the next frame is
    processed. In train_adjacent mode exactly the two nearest frames are
    decoded (fewer only when the clip is shorter); undecoded frames stay
    empty in the output masklet.
    """
    t_total = clip.num_frames
    order = propagation_order(t_total, keyframe, mode)
    tau = decoder.threshold if threshold is None else threshold

    masks = np.zeros((t_total, clip.height, clip.width), dtype=np.uint8)
    occ = np.zeros(t_total, dtype=np.float64)
    frame_logits: dict[int, torch.Tensor] = {}
    frame_occlusions: dict[int, torch.Tensor] = {}
    bank = MemoryBank(capacity=capacity)

    def run_frame(index: int, conditioned: bool) -> None:
        feats = encode_frames(clip, [index], encoder).maps[0]
        inputs = attend(feats, bank, attention) if conditioned else feats
        out = decode(inputs, fused.vector, decoder)
        frame_logits[index] = out.mask_logits
        frame_occlusions[index] = out.occlusion_score
        masks[index] = binarize(out.mask_logits, tau)
        occ[index] = float(out.occlusion_score.detach())
        soft = torch.sigmoid(out.mask_logits)
        bank.push(encode_memory(feats, soft, mem_encoder, frame_index=index))

    run_frame(keyframe, conditioned=False)
    for index in order:
        run_frame(index, conditioned=True)

    return PropagationResult(
        masklet=Masklet(masks),
        occlusion_scores=occ,
        keyframe=keyframe,
        frame_logits=frame_logits,
        frame_occlusions=frame_occlusions,
        bank=bank,
    )
