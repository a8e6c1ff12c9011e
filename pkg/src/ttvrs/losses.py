"""Training losses: pixel BCE, dice, template text cross-entropy, presence
BCE on occlusion scores, and their weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ValidationError


@dataclass(frozen=True)
class LossWeights:
    lambda_txt: float = 1.0
    lambda_mask: float = 1.0
    lambda_bce: float = 2.0
    lambda_dice: float = 0.5
    lambda_occ: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lambda_txt", "lambda_mask", "lambda_bce", "lambda_dice", "lambda_occ"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")


@dataclass
class LossComponents:
    txt: torch.Tensor
    bce: torch.Tensor
    dice: torch.Tensor
    occ: torch.Tensor


def bce_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy of sigmoid(logits) vs a {0,1} target.

    Uses the max(x,0) - x*t + log(1 + exp(-|x|)) form, stable for large
    logit magnitudes.
    """
    if logits.shape != target.shape:
        raise ValidationError(f"logits {tuple(logits.shape)} vs target {tuple(target.shape)}")
    t = target.to(logits.dtype)
    per = torch.clamp(logits, min=0) - logits * t + torch.log1p(torch.exp(-torch.abs(logits)))
    return per.mean()


def dice_loss(logits: torch.Tensor, target: torch.Tensor, eps: float = 1.0) -> torch.Tensor:
    """1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps) with p = sigmoid(logits)."""
    if logits.shape != target.shape:
        raise ValidationError(f"logits {tuple(logits.shape)} vs target {tuple(target.shape)}")
    p = torch.sigmoid(logits)
    t = target.to(logits.dtype)
    return 1.0 - (2.0 * (p * t).sum() + eps) / (p.sum() + t.sum() + eps)


def text_loss(logits: torch.Tensor, target_ids: torch.Tensor) -> torch.Tensor:
    """Mean per-position cross-entropy against the templated response."""
    if logits.ndim != 2:
        raise ValidationError(f"expected (L, V) logits, got {tuple(logits.shape)}")
    if logits.shape[0] != target_ids.shape[0]:
        raise ValidationError(
            f"{logits.shape[0]} logit rows vs {target_ids.shape[0]} target tokens"
        )
    log_probs = logits - torch.logsumexp(logits, dim=1, keepdim=True)
    picked = log_probs[torch.arange(logits.shape[0]), target_ids]
    return -picked.mean()


def total_loss(components: LossComponents, weights: LossWeights) -> torch.Tensor:
    mask = weights.lambda_bce * components.bce + weights.lambda_dice * components.dice
    return (
        weights.lambda_txt * components.txt
        + weights.lambda_mask * mask
        + weights.lambda_occ * components.occ
    )
