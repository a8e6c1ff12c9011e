"""Desk-scale video object segmentation from structured queries.

Pipeline: a toy convolutional encoder turns sampled frames and a query
into per-frame tokens plus one video-level token; similarity-weighted
fusion folds the frame tokens into the video token; the fused token
prompts a mask decoder on a selected keyframe, and the mask rolls out to
the remaining frames through a FIFO memory bank with dot-product
attention. Training, evaluation (region similarity J, contour accuracy F,
robustness R), ablation grids, and feature overlays run on procedurally
generated moving-shape videos.
"""

from .aggregation import (
    AggregationConfig,
    FusedToken,
    aggregate,
    cosine_similarity,
    similarity_weights,
    training_keyframe,
)
from .decoder import DecodeOutput, MaskDecoder, binarize, decode
from .encoder import (
    Encoder,
    FrameFeatures,
    ModelConfig,
    ProjectedTokenSet,
    RawTokenSet,
    encode_frames,
    encode_tokens,
    project_tokens,
    template_token_ids,
)
from .errors import (
    ConfigError,
    MissingArtifactError,
    NumericsError,
    TtvrsError,
    ValidationError,
    ZeroNormError,
)
from .inference import EvalConfig, InferenceResult, evaluate_manifest, run_video
from .keyframes import (
    SamplingConfig,
    ScoreCombo,
    SelectionScores,
    anchor_frame,
    build_selection_scores,
    occlusion_scores,
    sample_frames,
    select_keyframe,
)
from .losses import LossComponents, LossWeights, bce_loss, dice_loss, text_loss, total_loss
from .memory import (
    MemoryAttention,
    MemoryBank,
    MemoryEncoder,
    MemoryEntry,
    PropagationResult,
    attend,
    encode_memory,
    propagate,
    propagation_order,
)
from .metrics import (
    MetricsReport,
    VideoMetrics,
    build_report,
    contour_accuracy,
    pca_visualize,
    principal_heat,
    region_similarity,
    robustness,
    score_video,
)
from .model import SegModel, load_checkpoint, read_checkpoint_tensors, save_checkpoint
from .synthetic import (
    DatasetConfig,
    DatasetManifest,
    Masklet,
    ObjectSpec,
    Query,
    SceneSpec,
    VideoClip,
    generate_video,
    load_entry,
    load_manifest,
    make_dataset,
)
from .trainer import TrainConfig, smoothed, train, training_step, write_trace_csv

__version__ = "0.1.0"
