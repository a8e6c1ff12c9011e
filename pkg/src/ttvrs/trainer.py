"""End-to-end training loop.

Each iteration runs one video through encode -> token projection ->
similarity fusion -> training keyframe -> adjacent-frame propagation, then
descends the weighted total loss by plain gradient descent with a linear
warmup followed by a linear decay (or a constant rate). The keyframe
argmax is treated as non-differentiable. Everything is deterministic in
the configured seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .aggregation import AggregationConfig, aggregate, training_keyframe
from .decoder import decode
from .encoder import encode_frames, encode_tokens, project_tokens, template_token_ids
from .errors import NumericsError, ValidationError
from .keyframes import SamplingConfig, sample_frames
from .losses import LossComponents, LossWeights, bce_loss, dice_loss, text_loss, total_loss
from .memory import propagate
from .model import SegModel
from .synthetic import DatasetManifest, Masklet, Query, VideoClip, load_entry

MASK_STRATEGIES = ("multi", "single")  # propagate to neighbors vs keyframe only

# Kinds whose semantics survive flips and right-angle rotations (spatial
# order does not: flipping swaps left and right).
FLIP_SAFE_KINDS = ("attribute", "absent", "motion_rank")

AUGMENT_CODES = 8  # dihedral group of the square: 4 rotations x optional flip


def flip_sample(clip: VideoClip, gt: Masklet, code: int) -> tuple[VideoClip, Masklet]:
    """Apply one of the 8 square symmetries to frames and masks together.

    Bit 2 flips horizontally; bits 0-1 count quarter turns. Requires square
    frames for the rotating codes.
    """
    frames, masks = clip.frames, gt.masks
    if code & 4:
        frames = np.flip(frames, axis=3)
        masks = np.flip(masks, axis=2)
    turns = code & 3
    if turns:
        frames = np.rot90(frames, k=turns, axes=(2, 3))
        masks = np.rot90(masks, k=turns, axes=(1, 2))
    if code:
        return VideoClip(np.ascontiguousarray(frames)), Masklet(np.ascontiguousarray(masks))
    return clip, gt


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    iterations: int = 12000
    frames_per_clip: int = 8
    warmup_iterations: int = 100
    schedule: str = "decay"  # linear decay to decay_floor x peak, or "constant"
    decay_floor: float = 0.1
    seed: int = 7
    alpha: float = 0.1
    mask_strategy: str = "multi"
    memory_capacity: int = 4
    augment_flips: bool = True
    grad_clip: float = 5.0  # global-norm cap; stateless, 0 disables
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self) -> None:
        # learning_rate 0 is allowed: an explicit no-op training run.
        if self.learning_rate < 0:
            raise ValidationError("learning rate must be >= 0")
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        if not 8 <= self.frames_per_clip <= 12:
            raise ValidationError("frames_per_clip must lie in [8, 12]")
        if self.mask_strategy not in MASK_STRATEGIES:
            raise ValidationError(f"unknown mask strategy {self.mask_strategy!r}")
        if self.schedule not in ("decay", "constant"):
            raise ValidationError(f"unknown schedule {self.schedule!r}")
        if not 0.0 <= self.decay_floor <= 1.0:
            raise ValidationError("decay_floor must lie in [0, 1]")


def training_step(
    model: SegModel,
    clip: VideoClip,
    gt: Masklet,
    query: Query,
    config: TrainConfig,
    keyframe_override: int | None = None,
    frames_per_clip: int | None = None,
) -> tuple[LossComponents, dict]:
    """Forward pass of one video; returns loss components and diagnostics.

    `keyframe_override` bypasses the similarity argmax (used by the
    finite-difference checks, where a flipping argmax would break the
    smoothness assumption the check relies on).
    """
    t_total = clip.num_frames
    n_frames = frames_per_clip if frames_per_clip is not None else min(config.frames_per_clip, t_total)
    indices = sample_frames(t_total, SamplingConfig(strategy="uniform", max_frames=n_frames))
    feats = encode_frames(clip, indices, model.encoder)
    raw, text_logits = encode_tokens(feats, query, model.encoder)
    proj = project_tokens(raw, model.encoder)
    fused = aggregate(proj, AggregationConfig(alpha=config.alpha))
    if keyframe_override is None:
        keyframe = indices[training_keyframe(proj)]
    else:
        keyframe = keyframe_override

    if config.mask_strategy == "multi":
        prop = propagate(
            clip,
            keyframe,
            fused,
            model.encoder,
            model.decoder,
            model.memory_encoder,
            model.memory_attention,
            mode="train_adjacent",
            capacity=config.memory_capacity,
        )
        frame_logits = prop.frame_logits
        frame_occs = prop.frame_occlusions
    else:
        out = decode(encode_frames(clip, [keyframe], model.encoder).maps[0], fused.vector, model.decoder)
        frame_logits = {keyframe: out.mask_logits}
        frame_occs = {keyframe: out.occlusion_score}

    dtype = fused.vector.dtype
    decoded = sorted(frame_logits)
    bce_terms, dice_terms = [], []
    occ_logits, occ_labels = [], []
    for f in decoded:
        target = torch.from_numpy(gt.masks[f]).to(dtype)
        bce_terms.append(bce_loss(frame_logits[f], target))
        dice_terms.append(dice_loss(frame_logits[f], target))
        occ_logits.append(frame_occs[f])
        occ_labels.append(1.0 if gt.masks[f].any() else 0.0)

    components = LossComponents(
        txt=text_loss(text_logits, template_token_ids(query, len(indices), model.config)),
        bce=torch.stack(bce_terms).mean(),
        dice=torch.stack(dice_terms).mean(),
        occ=bce_loss(torch.stack(occ_logits), torch.tensor(occ_labels, dtype=dtype)),
    )
    info = {"keyframe": keyframe, "decoded_frames": decoded, "sampled": indices}
    return components, info


def warmup_rate(base: float, iteration: int, warmup_iterations: int) -> float:
    """Linear warmup to `base` over `warmup_iterations`, then constant."""
    if warmup_iterations <= 0:
        return base
    return base * min(1.0, (iteration + 1) / warmup_iterations)


def schedule_rate(config: TrainConfig, iteration: int) -> float:
    """Learning rate at `iteration`: linear warmup, then constant or linear
    decay down to decay_floor x peak at the final iteration."""
    rate = warmup_rate(config.learning_rate, iteration, config.warmup_iterations)
    if config.schedule == "constant" or iteration < config.warmup_iterations:
        return rate
    span = max(1, config.iterations - config.warmup_iterations)
    progress = (iteration - config.warmup_iterations) / span
    factor = 1.0 - (1.0 - config.decay_floor) * min(1.0, progress)
    return config.learning_rate * factor


def train(
    manifest: DatasetManifest,
    config: TrainConfig,
    model: SegModel | None = None,
) -> tuple[SegModel, list[dict]]:
    """Train on all manifest entries; returns the model and the loss trace.

    Videos are visited in a seeded random order; the loss trajectory
    depends on dataset order only through that seed.
    """
    if not manifest.entries:
        raise ValidationError("training dataset is empty")
    torch.manual_seed(config.seed)
    if model is None:
        model = SegModel().init_seeded(config.seed)
    dataset = [load_entry(manifest, e) + (e.query,) for e in manifest.entries]

    pick = np.random.default_rng([config.seed, 0x7A])
    trace: list[dict] = []
    for it in range(config.iterations):
        clip, gt, query = dataset[int(pick.integers(len(dataset)))]
        if config.augment_flips and query.kind in FLIP_SAFE_KINDS and clip.height == clip.width:
            clip, gt = flip_sample(clip, gt, int(pick.integers(AUGMENT_CODES)))
        components, _ = training_step(model, clip, gt, query, config)
        loss = total_loss(components, config.weights)
        if not torch.isfinite(loss):
            raise NumericsError(
                f"non-finite loss at iteration {it}: "
                f"txt={components.txt.item()} bce={components.bce.item()} "
                f"dice={components.dice.item()} occ={components.occ.item()}"
            )
        model.zero_grad(set_to_none=True)
        loss.backward()
        if config.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        rate = schedule_rate(config, it)
        with torch.no_grad():
            for param in model.parameters():
                if param.grad is not None:
                    param -= rate * param.grad
        trace.append(
            {
                "iteration": it,
                "loss": loss.item(),
                "l_txt": components.txt.item(),
                "l_bce": components.bce.item(),
                "l_dice": components.dice.item(),
                "l_occ": components.occ.item(),
            }
        )
    return model, trace


def write_trace_csv(trace: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "l_txt", "l_bce", "l_dice", "l_occ"])
        for row in trace:
            writer.writerow(
                [row["iteration"]]
                + [f"{row[k]:.6f}" for k in ("loss", "l_txt", "l_bce", "l_dice", "l_occ")]
            )


def smoothed(values: list[float], window: int = 20) -> list[float]:
    """Trailing moving average with a ramp-up over the first `window` points."""
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out
