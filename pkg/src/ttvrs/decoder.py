"""Promptable mask decoder.

A token embedding is projected into a per-channel kernel; mask logits are
the per-location inner product of that kernel with the frame's
mask-embedding field (a tanh-bounded 1x1 transform of the feature map),
upsampled to frame resolution by parameter-free nearest-neighbor
repetition so expected values stay exactly computable. A per-frame
presence (occlusion) score is an affine readout of the spatially pooled
mask embeddings gated by the kernel: higher means the target is judged
present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .encoder import ModelConfig
from .errors import ValidationError


@dataclass
class DecodeOutput:
    mask_logits: torch.Tensor      # (H, W)
    occlusion_score: torch.Tensor  # scalar, pre-sigmoid


class MaskDecoder(nn.Module):
    """Kernel projection, mask-embedding transform, and occlusion head."""

    def __init__(self, cfg: ModelConfig, threshold: float = 0.5):
        super().__init__()
        self.cfg = cfg
        c = cfg.feat_channels
        self.feature_proj = nn.Conv2d(c, c, kernel_size=1)
        self.kernel_proj = nn.Linear(cfg.token_dim, c, bias=False)
        self.logit_bias = nn.Parameter(torch.zeros(()))
        self.occlusion_head = nn.Linear(c, 1)
        self.threshold = threshold

    def mask_embeddings(self, features: torch.Tensor) -> torch.Tensor:
        """Mask-embedding field (C, h, w) for one frame's feature map.

        tanh keeps the field bounded, so mask logits cannot blow up on the
        feature side even when attention-conditioned inputs grow.
        """
        return torch.tanh(self.feature_proj(features.unsqueeze(0))).squeeze(0)


def upsample_nearest(low: torch.Tensor, stride: int) -> torch.Tensor:
    """Exact nearest-neighbor upsampling of a (h, w) map by `stride`."""
    return low.repeat_interleave(stride, dim=0).repeat_interleave(stride, dim=1)


def decode(features: torch.Tensor, embedding: torch.Tensor, decoder: MaskDecoder) -> DecodeOutput:
    """Mask logits at frame resolution plus the presence score for one frame.

    Pure in (features, embedding, parameters); sees no other frame and no
    memory state.
    """
    cfg = decoder.cfg
    if features.ndim != 3 or features.shape[0] != cfg.feat_channels:
        raise ValidationError(f"expected ({cfg.feat_channels}, h, w) features, got {tuple(features.shape)}")
    emb = embedding.reshape(-1)
    if emb.shape[0] != cfg.token_dim:
        raise ValidationError(f"embedding dimension {emb.shape[0]} != {cfg.token_dim}")
    m = decoder.mask_embeddings(features)
    kernel = decoder.kernel_proj(emb)
    low = torch.einsum("c,chw->hw", kernel, m) + decoder.logit_bias
    logits = upsample_nearest(low, cfg.stride)
    pooled = m.mean(dim=(1, 2))
    occ = decoder.occlusion_head(pooled * kernel).reshape(())
    return DecodeOutput(mask_logits=logits, occlusion_score=occ)


def binarize(logits: torch.Tensor | np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary mask: 1 where sigmoid(logit) is strictly above `threshold`."""
    if isinstance(logits, torch.Tensor):
        probs = torch.sigmoid(logits.detach()).cpu().numpy()
    else:
        probs = 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))
    return (probs > threshold).astype(np.uint8)
