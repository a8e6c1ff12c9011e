"""Toy video/query encoder.

Two stride-2 convolution blocks turn each frame into a feature map (total
stride 4); a pooled per-frame vector combined with a learned query
embedding yields one raw token per frame plus a single video-level token,
and a fixed-length template of text logits. A shared row-wise MLP projects
raw tokens into the mask decoder's feature space.

Frames are always encoded one at a time so a frame's features are
bit-identical regardless of which frame subset was requested (conv kernels
may differ between batch sizes otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ValidationError
from .synthetic import PALETTE, Query, VideoClip

# Toy vocabulary. Positions 1 and 2 are the reserved per-frame and
# video-level mask-token symbols emitted by the text template.
FRAME_TOKEN_ID = 1
VIDEO_TOKEN_ID = 2
ANSWER_FILLER_ID = 3
KIND_TOKEN_BASE = 4    # 4..7: query kind
COLOR_TOKEN_BASE = 8   # 8..15: color parameter
RANK_TOKEN_BASE = 16   # 16..19: rank parameter

# Query encoding: kind one-hot (3), color one-hot (len(PALETTE)), rank
# one-hot (4), plus spare zeros. One-hot parameters keep the query-to-kernel
# mapping close to a per-color/per-rank table lookup, which a small model
# can actually learn.
MAX_RANK = 4
QUERY_FEATURE_DIM = 3 + len(PALETTE) + MAX_RANK + 2


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions of the toy model; defaults are the desk-scale sizes."""

    frame_height: int = 64
    frame_width: int = 64
    feat_channels: int = 32     # decoder-side feature channels
    raw_token_dim: int = 64     # token dimension at the encoder output
    token_dim: int = 32         # token dimension after projection
    query_emb_dim: int = 16
    text_context_dim: int = 32
    vocab_size: int = 32
    answer_len: int = 4
    max_frame_slots: int = 16
    projection_layers: int = 2
    stride: int = 4             # fixed by the two stride-2 conv blocks

    def __post_init__(self) -> None:
        if self.frame_height % self.stride or self.frame_width % self.stride:
            raise ValidationError("frame size must be divisible by the encoder stride")
        if self.vocab_size < 8:
            raise ValidationError("vocabulary must have at least 8 symbols")
        if self.feat_channels < 2 or self.feat_channels % 2:
            raise ValidationError("feat_channels must be even and >= 2")
        if self.projection_layers < 1:
            raise ValidationError("projection MLP needs at least one layer")

    @property
    def feat_height(self) -> int:
        return self.frame_height // self.stride

    @property
    def feat_width(self) -> int:
        return self.frame_width // self.stride

    @property
    def text_len_max(self) -> int:
        return self.answer_len + self.max_frame_slots + 1


@dataclass
class FrameFeatures:
    """Per-frame feature maps and their spatial means."""

    maps: torch.Tensor    # (n, C, h, w)
    pooled: torch.Tensor  # (n, C)
    indices: tuple[int, ...]


@dataclass
class RawTokenSet:
    frame_tokens: torch.Tensor  # (n, raw_token_dim)
    video_token: torch.Tensor   # (1, raw_token_dim)


@dataclass
class ProjectedTokenSet:
    frame_tokens: torch.Tensor  # (n, token_dim)
    video_token: torch.Tensor   # (1, token_dim)


def query_feature_vector(query: Query, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Fixed-width numeric encoding of a query.

    Absent queries are deliberately encoded as attribute queries for their
    color: whether the queried object exists must be inferred from the
    video, never from the query encoding.
    """
    v = torch.zeros(QUERY_FEATURE_DIM, dtype=dtype)
    kind = "attribute" if query.kind == "absent" else query.kind
    v[("attribute", "spatial_order", "motion_rank").index(kind)] = 1.0
    if query.color_id is not None:
        v[3 + query.color_id] = 1.0
    if query.rank is not None:
        v[3 + len(PALETTE) + min(query.rank, MAX_RANK) - 1] = 1.0
    return v


def template_token_ids(query: Query, num_frames: int, cfg: ModelConfig) -> torch.Tensor:
    """Ground-truth token ids for the fixed response template.

    Layout: answer_len answer tokens describing the query, one per-frame
    mask token per sampled frame, then the video-level mask token.
    """
    if num_frames > cfg.max_frame_slots:
        raise ValidationError(f"{num_frames} frames exceed {cfg.max_frame_slots} template slots")
    kind = "attribute" if query.kind == "absent" else query.kind
    ids = [KIND_TOKEN_BASE + ("attribute", "spatial_order", "motion_rank").index(kind)]
    if query.color_id is not None:
        ids.append(COLOR_TOKEN_BASE + query.color_id)
    elif query.rank is not None:
        ids.append(RANK_TOKEN_BASE + min(query.rank, 4) - 1)
    while len(ids) < cfg.answer_len:
        ids.append(ANSWER_FILLER_ID)
    ids.extend([FRAME_TOKEN_ID] * num_frames)
    ids.append(VIDEO_TOKEN_ID)
    return torch.tensor(ids, dtype=torch.long)


# Encoder input planes: RGB plus the pairwise channel minima. The minima
# are analytic conjunction detectors (e.g. magenta = min(R, B) high with G
# low), which make each palette color linearly separable at the input
# instead of forcing the convolutions to learn saturated AND gates.
INPUT_CHANNELS = 6


def frame_input_planes(frame: torch.Tensor) -> torch.Tensor:
    """(3, H, W) float frame in [0, 1] -> (INPUT_CHANNELS, H, W)."""
    r, g, b = frame[0], frame[1], frame[2]
    return torch.stack([r, g, b, torch.minimum(r, g), torch.minimum(r, b), torch.minimum(g, b)])


class Encoder(nn.Module):
    """Frame encoder, query embedder, token heads, text head, projection MLP."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.feat_channels
        self.conv1 = nn.Conv2d(INPUT_CHANNELS, c // 2, kernel_size=3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(c // 2, c, kernel_size=3, stride=2, padding=1)
        self.query_embed = nn.Linear(QUERY_FEATURE_DIM, cfg.query_emb_dim)
        self.frame_token_head = nn.Linear(c + cfg.query_emb_dim, cfg.raw_token_dim)
        self.video_token_head = nn.Linear(c + cfg.query_emb_dim, cfg.raw_token_dim)
        self.text_context = nn.Linear(c + cfg.query_emb_dim, cfg.text_context_dim)
        self.text_positions = nn.Parameter(torch.zeros(cfg.text_len_max, cfg.text_context_dim))
        self.text_out = nn.Linear(cfg.text_context_dim, cfg.vocab_size)
        widths = [cfg.raw_token_dim] * cfg.projection_layers + [cfg.token_dim]
        self.projector = nn.ModuleList(
            nn.Linear(widths[i], widths[i + 1]) for i in range(cfg.projection_layers)
        )
        self.query_align = nn.Linear(cfg.query_emb_dim, c)

    def frame_map(self, frame: torch.Tensor) -> torch.Tensor:
        """Feature map (C, h, w) for one frame given as (3, H, W) in [0, 1]."""
        x = frame_input_planes(frame).unsqueeze(0)
        x = torch.tanh(self.conv1(x))
        x = torch.tanh(self.conv2(x))
        return x.squeeze(0)

    def embed_query(self, query: Query) -> torch.Tensor:
        dtype = self.query_embed.weight.dtype
        return torch.tanh(self.query_embed(query_feature_vector(query, dtype)))

    def project_rows(self, rows: torch.Tensor) -> torch.Tensor:
        out = rows
        for i, layer in enumerate(self.projector):
            if i:
                out = torch.tanh(out)
            out = layer(out)
        return out


def _frame_to_tensor(frame: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(frame)).to(dtype) / 255.0


def encode_frames(clip: VideoClip, indices, encoder: Encoder) -> FrameFeatures:
    """Feature maps and pooled vectors for the given frame indices."""
    t_total = clip.num_frames
    idx = tuple(int(i) for i in indices)
    for i in idx:
        if not 0 <= i < t_total:
            raise ValidationError(f"frame index {i} outside [0, {t_total})")
    dtype = encoder.conv1.weight.dtype
    cfg = encoder.cfg
    if not idx:
        maps = torch.zeros((0, cfg.feat_channels, cfg.feat_height, cfg.feat_width), dtype=dtype)
    else:
        maps = torch.stack(
            [encoder.frame_map(_frame_to_tensor(clip.frames[i], dtype)) for i in idx]
        )
    pooled = maps.mean(dim=(2, 3))
    return FrameFeatures(maps=maps, pooled=pooled, indices=idx)


def encode_tokens(
    features: FrameFeatures, query: Query, encoder: Encoder
) -> tuple[RawTokenSet, torch.Tensor]:
    """Raw per-frame tokens, the raw video token, and template text logits.

    Each frame token reads only its own pooled features; the video token
    reads the mean over all pooled features. Both are concatenated with
    the query embedding.
    """
    n = features.pooled.shape[0]
    if n == 0:
        raise ValidationError("cannot encode tokens from zero frames")
    cfg = encoder.cfg
    q = encoder.embed_query(query)
    frame_in = torch.cat([features.pooled, q.unsqueeze(0).expand(n, -1)], dim=1)
    frame_tokens = torch.tanh(encoder.frame_token_head(frame_in))
    mean_pooled = features.pooled.mean(dim=0)
    video_in = torch.cat([mean_pooled, q])
    video_token = torch.tanh(encoder.video_token_head(video_in)).unsqueeze(0)

    ctx = torch.tanh(encoder.text_context(video_in))
    rows = list(range(cfg.answer_len))
    rows += [cfg.answer_len + i for i in range(n)]
    rows += [cfg.answer_len + cfg.max_frame_slots]
    pos = encoder.text_positions[rows]
    text_logits = encoder.text_out(torch.tanh(pos + ctx))
    return RawTokenSet(frame_tokens=frame_tokens, video_token=video_token), text_logits


def project_tokens(raw: RawTokenSet, encoder: Encoder) -> ProjectedTokenSet:
    """Apply the shared projection MLP row-wise to both token groups."""
    return ProjectedTokenSet(
        frame_tokens=encoder.project_rows(raw.frame_tokens),
        video_token=encoder.project_rows(raw.video_token),
    )
