"""Similarity-weighted fusion of frame tokens into the video token.

The fused vector is video_token + alpha * sum_i w_i * frame_tokens[i],
where w = softmax over the cosine similarities between each frame token
and the video token. The same similarities pick the training-time
keyframe (argmax, lowest index on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .encoder import ProjectedTokenSet
from .errors import ValidationError, ZeroNormError


@dataclass(frozen=True)
class AggregationConfig:
    alpha: float = 0.1

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValidationError("fusion coefficient alpha must be >= 0")


@dataclass
class FusedToken:
    vector: torch.Tensor        # (1, d)
    weights: torch.Tensor       # (n,), softmax-normalized, sums to 1
    similarities: torch.Tensor  # (n,), raw cosine values


def cosine_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    a = a.reshape(-1)
    b = b.reshape(-1)
    na = torch.linalg.vector_norm(a)
    nb = torch.linalg.vector_norm(b)
    if na.item() == 0.0 or nb.item() == 0.0:
        raise ZeroNormError("cosine similarity of a zero-norm embedding")
    return (a @ b) / (na * nb)


def similarity_weights(tokens: ProjectedTokenSet) -> tuple[torch.Tensor, torch.Tensor]:
    """Cosine similarity of each frame token to the video token, and softmax weights."""
    sims = torch.stack(
        [cosine_similarity(row, tokens.video_token) for row in tokens.frame_tokens]
    )
    return sims, torch.softmax(sims, dim=0)


def aggregate(tokens: ProjectedTokenSet, config: AggregationConfig) -> FusedToken:
    sims, weights = similarity_weights(tokens)
    fused = tokens.video_token + config.alpha * (weights.unsqueeze(0) @ tokens.frame_tokens)
    return FusedToken(vector=fused, weights=weights, similarities=sims)


def argmax_first(values: torch.Tensor) -> int:
    """Index of the largest value; ties broken by the lowest index."""
    best = 0
    vals = values.reshape(-1)
    for i in range(1, vals.shape[0]):
        if vals[i].item() > vals[best].item():
            best = i
    return best


def training_keyframe(tokens: ProjectedTokenSet) -> int:
    """Index of the frame token closest to the video token (ties -> lowest)."""
    sims, _ = similarity_weights(tokens)
    return argmax_first(sims)
