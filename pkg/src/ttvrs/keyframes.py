"""Inference-time frame sampling and keyframe scoring.

Up to `max_frames` frames are sampled (uniform grid, seeded random, or a
uniform grid with its nearest member replaced by a query-aligned anchor
frame). Each sampled frame gets up to three scores: a query/feature
alignment score, the token similarity from aggregation, and the decoder's
presence (occlusion) score. Enabled score vectors are softmax-normalized
and summed; the argmax picks the keyframe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .aggregation import FusedToken, argmax_first
from .decoder import MaskDecoder, decode
from .encoder import Encoder, FrameFeatures, encode_frames
from .errors import ValidationError
from .synthetic import Query, VideoClip

SAMPLING_STRATEGIES = ("random", "uniform", "anchor")


@dataclass(frozen=True)
class SamplingConfig:
    strategy: str = "anchor"
    max_frames: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in SAMPLING_STRATEGIES:
            raise ValidationError(f"unknown sampling strategy {self.strategy!r}")
        if self.max_frames < 1:
            raise ValidationError("max_frames must be >= 1")


@dataclass(frozen=True)
class ScoreCombo:
    """Which score vectors participate in keyframe selection.

    The shipped default combines token similarity with the occlusion
    score; the alignment (clip-proxy) score is off by default.
    """

    use_clip: bool = False
    use_token_sim: bool = True
    use_occlusion: bool = True

    def __post_init__(self) -> None:
        if not (self.use_clip or self.use_token_sim or self.use_occlusion):
            raise ValidationError("at least one score must be enabled")


@dataclass
class SelectionScores:
    occlusion: np.ndarray           # S_o, raw decoder presence scores
    occlusion_norm: np.ndarray      # softmax of occlusion, sums to 1
    token_sim: np.ndarray
    clip: np.ndarray
    combined: np.ndarray | None = field(default=None)


def _safe_cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine that returns 0.0 on zero norms (scoring, not aggregation)."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / e.sum()


def alignment_scores(features: FrameFeatures, query: Query, encoder: Encoder) -> np.ndarray:
    """Per-frame cosine between the aligned query embedding and pooled features."""
    with torch.no_grad():
        qv = encoder.query_align(encoder.embed_query(query)).cpu().numpy().astype(np.float64)
        pooled = features.pooled.detach().cpu().numpy().astype(np.float64)
    return np.array([_safe_cosine(qv, row) for row in pooled])


def anchor_frame(clip: VideoClip, query: Query, encoder: Encoder) -> int:
    """Frame whose pooled features best align with the query (ties -> lowest)."""
    feats = encode_frames(clip, range(clip.num_frames), encoder)
    scores = alignment_scores(feats, query, encoder)
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def sample_frames(num_frames: int, config: SamplingConfig, anchor: int | None = None) -> list[int]:
    """Sorted unique frame indices, length min(max_frames, num_frames).

    uniform: equally spaced including frame 0 (floor(i*(T-1)/(n-1)));
    random: seeded, without replacement; anchor: the uniform grid with the
    member nearest to `anchor` replaced by it.
    """
    if num_frames < 1:
        raise ValidationError("clip must have at least one frame")
    if config.strategy == "anchor":
        if anchor is None:
            raise ValidationError("anchor strategy requires an anchor index")
        if not 0 <= anchor < num_frames:
            raise ValidationError(f"anchor {anchor} outside [0, {num_frames})")
    n = min(config.max_frames, num_frames)
    if config.strategy == "random":
        rng = np.random.default_rng(config.seed)
        return sorted(int(i) for i in rng.choice(num_frames, size=n, replace=False))
    if n == 1:
        base = [0]
    else:
        base = [i * (num_frames - 1) // (n - 1) for i in range(n)]
    if config.strategy == "uniform":
        return base
    nearest = min(range(n), key=lambda j: (abs(base[j] - anchor), base[j]))
    base[nearest] = anchor
    return sorted(base)


def occlusion_scores(features: FrameFeatures, fused: FusedToken, decoder: MaskDecoder) -> np.ndarray:
    """Per-frame presence scores from independent decodes (no memory state)."""
    out = []
    for i in range(features.maps.shape[0]):
        out.append(float(decode(features.maps[i], fused.vector, decoder).occlusion_score.detach()))
    return np.array(out, dtype=np.float64)


def build_selection_scores(
    occlusion: np.ndarray, token_sim: np.ndarray, clip_score: np.ndarray
) -> SelectionScores:
    occlusion = np.asarray(occlusion, dtype=np.float64)
    return SelectionScores(
        occlusion=occlusion,
        occlusion_norm=_softmax(occlusion),
        token_sim=np.asarray(token_sim, dtype=np.float64),
        clip=np.asarray(clip_score, dtype=np.float64),
    )


def select_keyframe(scores: SelectionScores, combo: ScoreCombo) -> int:
    """Argmax of the summed softmax-normalized enabled scores (ties -> lowest)."""
    enabled = []
    if combo.use_clip:
        enabled.append(scores.clip)
    if combo.use_token_sim:
        enabled.append(scores.token_sim)
    if combo.use_occlusion:
        enabled.append(scores.occlusion)
    lengths = {len(v) for v in enabled}
    if len(lengths) != 1:
        raise ValidationError(f"enabled score vectors differ in length: {sorted(lengths)}")
    combined = np.zeros(lengths.pop(), dtype=np.float64)
    for vec in enabled:
        combined += _softmax(vec)
    scores.combined = combined
    return argmax_first(torch.from_numpy(combined))
