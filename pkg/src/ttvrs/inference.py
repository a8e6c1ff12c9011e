"""Full inference path: sample frames, fuse tokens, pick the keyframe,
propagate the mask across the video, and score the results."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import torch

from .aggregation import AggregationConfig, aggregate
from .decoder import binarize, decode
from .encoder import encode_frames, encode_tokens, project_tokens
from .errors import ValidationError
from .keyframes import (
    SamplingConfig,
    ScoreCombo,
    SelectionScores,
    alignment_scores,
    anchor_frame,
    build_selection_scores,
    occlusion_scores,
    sample_frames,
    select_keyframe,
)
from .memory import propagate
from .metrics import (
    DEFAULT_BOUNDARY_TOLERANCE,
    DEFAULT_HALLUCINATION_EPS,
    MetricsReport,
    build_report,
    score_video,
)
from .model import SegModel
from .synthetic import DatasetManifest, Masklet, Query, VideoClip, load_entry

DECODE_STRATEGIES = ("memory", "independent")  # propagation vs per-frame decode


@dataclass(frozen=True)
class EvalConfig:
    alpha: float = 0.1
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    combo: ScoreCombo = field(default_factory=ScoreCombo)
    decode_strategy: str = "memory"
    memory_capacity: int = 4
    boundary_tolerance: int = DEFAULT_BOUNDARY_TOLERANCE
    hallucination_eps: float = DEFAULT_HALLUCINATION_EPS

    def __post_init__(self) -> None:
        if self.decode_strategy not in DECODE_STRATEGIES:
            raise ValidationError(f"unknown decode strategy {self.decode_strategy!r}")


@dataclass
class InferenceResult:
    masklet: Masklet
    keyframe: int
    sampled_indices: list
    scores: SelectionScores
    occlusion_per_frame: np.ndarray


def decode_frames_independent(
    clip: VideoClip, fused, model: SegModel, threshold: float
) -> tuple[Masklet, np.ndarray]:
    """Decode every frame with the fused token alone (no memory)."""
    masks = np.zeros((clip.num_frames, clip.height, clip.width), dtype=np.uint8)
    occ = np.zeros(clip.num_frames, dtype=np.float64)
    for t in range(clip.num_frames):
        feats = encode_frames(clip, [t], model.encoder).maps[0]
        out = decode(feats, fused.vector, model.decoder)
        masks[t] = binarize(out.mask_logits, threshold)
        occ[t] = float(out.occlusion_score.detach())
    return Masklet(masks), occ


def run_video(clip: VideoClip, query: Query, model: SegModel, cfg: EvalConfig) -> InferenceResult:
    """Segment one video for one query."""
    with torch.no_grad():
        anchor = None
        if cfg.sampling.strategy == "anchor":
            anchor = anchor_frame(clip, query, model.encoder)
        indices = sample_frames(clip.num_frames, cfg.sampling, anchor)
        feats = encode_frames(clip, indices, model.encoder)
        raw, _ = encode_tokens(feats, query, model.encoder)
        proj = project_tokens(raw, model.encoder)
        fused = aggregate(proj, AggregationConfig(alpha=cfg.alpha))

        occ = occlusion_scores(feats, fused, model.decoder)
        token_sim = fused.similarities.detach().cpu().numpy().astype(np.float64)
        clip_sc = alignment_scores(feats, query, model.encoder)
        scores = build_selection_scores(occ, token_sim, clip_sc)
        keyframe = indices[select_keyframe(scores, cfg.combo)]

        if cfg.decode_strategy == "memory":
            prop = propagate(
                clip,
                keyframe,
                fused,
                model.encoder,
                model.decoder,
                model.memory_encoder,
                model.memory_attention,
                mode="full_video",
                capacity=cfg.memory_capacity,
            )
            masklet, per_frame_occ = prop.masklet, prop.occlusion_scores
        else:
            masklet, per_frame_occ = decode_frames_independent(
                clip, fused, model, model.decoder.threshold
            )
    return InferenceResult(
        masklet=masklet,
        keyframe=keyframe,
        sampled_indices=indices,
        scores=scores,
        occlusion_per_frame=per_frame_occ,
    )


def evaluate_manifest(
    manifest: DatasetManifest,
    model: SegModel,
    cfg: EvalConfig,
    oracle: bool = False,
    workers: int = 1,
) -> tuple[MetricsReport, list]:
    """Score every manifest entry; returns (report, predicted masklets).

    Entries are processed independently (optionally in parallel) and
    results are assembled in manifest order, so the report is
    deterministic regardless of worker count. `oracle` scores the ground
    truth against itself, bypassing the model.
    """
    if not manifest.entries:
        raise ValidationError("evaluation dataset is empty")

    def run_one(item) -> tuple:
        idx, entry = item
        clip, gt = load_entry(manifest, entry)
        if oracle:
            pred = gt
        else:
            pred = run_video(clip, entry.query, model, cfg).masklet
        vid = f"vid_{idx:04d}"
        metrics = score_video(
            vid,
            pred,
            gt,
            negative=entry.query.kind == "absent",
            tolerance=cfg.boundary_tolerance,
            eps=cfg.hallucination_eps,
        )
        return metrics, pred

    items = list(enumerate(manifest.entries))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, items))
    else:
        results = [run_one(item) for item in items]
    per_video = [m for m, _ in results]
    predictions = [p for _, p in results]
    return build_report(per_video), predictions
