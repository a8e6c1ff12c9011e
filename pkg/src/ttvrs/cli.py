"""Command-line entry point.

Subcommands: gen-data, train, eval, ablate, visualize. Every option can
also be supplied through a JSON config file (--config); explicit flags win
over file values, unknown file keys are rejected. Exit codes: 0 success,
2 configuration error, 3 missing artifact, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, MissingArtifactError, NumericsError, ValidationError
from .inference import EvalConfig, evaluate_manifest, run_video
from .keyframes import SamplingConfig, ScoreCombo
from .losses import LossWeights
from .metrics import (
    blend_heat,
    pca_visualize,
    write_report_csv,
    write_report_json,
)
from .model import SegModel, load_checkpoint, save_checkpoint
from .netpbm import write_ppm
from .synthetic import DatasetConfig, load_entry, load_manifest, make_dataset
from .trainer import TrainConfig, train, write_trace_csv
from .encoder import encode_frames

SCORE_NAMES = ("clip", "token_sim", "occlusion")


@dataclass(frozen=True)
class Opt:
    key: str
    default: object
    parse: type
    help: str
    required: bool = False


def _parse_kind_mix(text: str) -> dict:
    mix = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"kind mix entry {part!r} must look like kind=weight")
        kind, weight = part.split("=", 1)
        mix[kind.strip()] = float(weight)
    if not mix:
        raise ConfigError("empty kind mix")
    return mix


def _parse_floats(text: str) -> list:
    try:
        return [float(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad float list {text!r}") from exc


def _parse_scores(text: str) -> list:
    names = [s.strip() for s in str(text).split(",") if s.strip()]
    for name in names:
        if name not in SCORE_NAMES:
            raise ConfigError(f"unknown score {name!r}; choose from {SCORE_NAMES}")
    if not names:
        raise ConfigError("at least one score must be enabled")
    return names


GEN_OPTS = [
    Opt("out", None, str, "output dataset directory", required=True),
    Opt("videos", 40, int, "total number of videos"),
    Opt("negatives", 0.1, float, "fraction of videos with target-absent queries"),
    Opt("windowed", 0.2, float, "fraction of positives whose target is visible only in a window"),
    Opt("kind_mix", "attribute=1.0", str, "positive query kinds as kind=weight[,kind=weight...]"),
    Opt("split", "train", str, "split label recorded in the manifest"),
    Opt("width", 64, int, "frame width in pixels"),
    Opt("height", 64, int, "frame height in pixels"),
    Opt("frames", 16, int, "frames per video"),
    Opt("min_size", 18, int, "minimum object size in pixels"),
    Opt("max_size", 28, int, "maximum object size in pixels"),
    Opt("min_objects", 2, int, "minimum objects per scene"),
    Opt("max_objects", 2, int, "maximum objects per scene"),
    Opt("seed", 7, int, "generation seed"),
]

TRAIN_OPTS = [
    Opt("data", None, str, "dataset directory containing manifest.json", required=True),
    Opt("out", None, str, "checkpoint output path", required=True),
    Opt("trace", None, str, "loss trace CSV path (default: <out>.trace.csv)"),
    Opt("lr", 0.05, float, "peak learning rate after warmup"),
    Opt("iterations", 12000, int, "training iterations (one video per step)"),
    Opt("frames_per_clip", 8, int, "frames sampled per training clip (8..12)"),
    Opt("warmup", 100, int, "linear warmup iterations"),
    Opt("schedule", "decay", str, "rate shape after warmup: decay (linear) or constant"),
    Opt("seed", 7, int, "training seed"),
    Opt("alpha", 0.1, float, "token fusion coefficient"),
    Opt("strategy", "multi", str, "mask supervision: multi (keyframe+neighbors) or single"),
    Opt("memory_capacity", 4, int, "memory bank capacity"),
    Opt("augment", 1, int, "1 to train with flip/rotation augmentation, 0 to disable"),
    Opt("grad_clip", 5.0, float, "global gradient-norm cap (0 disables)"),
    Opt("lambda_txt", 1.0, float, "text loss weight"),
    Opt("lambda_mask", 1.0, float, "mask loss weight"),
    Opt("lambda_bce", 2.0, float, "BCE weight inside the mask loss"),
    Opt("lambda_dice", 0.5, float, "dice weight inside the mask loss"),
    Opt("lambda_occ", 1.0, float, "presence (occlusion) loss weight"),
]

EVAL_OPTS = [
    Opt("data", None, str, "dataset directory containing manifest.json", required=True),
    Opt("checkpoint", None, str, "model checkpoint (optional with --oracle)"),
    Opt("out", None, str, "report output directory", required=True),
    Opt("alpha", None, float, "fusion coefficient (default: value stored in the checkpoint)"),
    Opt("max_frames", 12, int, "frames sampled per video"),
    Opt("sampling", "anchor", str, "frame sampling strategy: anchor, uniform, or random"),
    Opt("sampling_seed", 0, int, "seed for random sampling"),
    Opt("scores", "token_sim,occlusion", str, "keyframe score combination (comma list)"),
    Opt("decode", "memory", str, "decode strategy: memory (propagation) or independent"),
    Opt("memory_capacity", None, int, "memory bank capacity (default: checkpoint value)"),
    Opt("tolerance", 1, int, "boundary tolerance in pixels for contour accuracy"),
    Opt("eps", 1e-3, float, "hallucination area-fraction threshold for robustness"),
    Opt("workers", 1, int, "parallel evaluation workers (capped by TTVRS_THREADS)"),
    Opt("oracle", False, bool, "score the ground truth against itself (no model)"),
]

ABLATE_OPTS = [
    Opt("grid", None, str, "ablation grid: alpha, tks, decode, or sampling", required=True),
    Opt("out", None, str, "output directory for the grid CSV", required=True),
    Opt("data", None, str, "training dataset directory (alpha/decode grids)"),
    Opt("eval_attr", None, str, "attribute-query eval dataset directory", required=True),
    Opt("eval_rel", None, str, "relational-query eval dataset directory (optional)"),
    Opt("checkpoint", None, str, "trained checkpoint (tks/sampling grids)"),
    Opt("alphas", "0,0.1,0.25,0.5", str, "alpha grid values (comma list)"),
    Opt("lr", 0.05, float, "learning rate for retraining grids"),
    Opt("iterations", 12000, int, "iterations for retraining grids"),
    Opt("frames_per_clip", 8, int, "frames per training clip"),
    Opt("warmup", 100, int, "warmup iterations for retraining grids"),
    Opt("seed", 7, int, "seed for retraining grids"),
    Opt("max_frames", 12, int, "frames sampled per eval video"),
    Opt("workers", 1, int, "parallel evaluation workers (capped by TTVRS_THREADS)"),
]

VIS_OPTS = [
    Opt("data", None, str, "dataset directory containing manifest.json", required=True),
    Opt("checkpoint", None, str, "model checkpoint", required=True),
    Opt("out", None, str, "overlay output directory", required=True),
    Opt("mode", "pca", str, "overlay mode: pca (leading embedding component) or mask"),
    Opt("limit", 0, int, "max videos to visualize (0 = all)"),
    Opt("alpha", None, float, "fusion coefficient (default: checkpoint value)"),
    Opt("max_frames", 12, int, "frames sampled per video"),
    Opt("strength", 0.6, float, "overlay blend strength"),
]


def _add_opts(parser: argparse.ArgumentParser, opts: list) -> None:
    for o in opts:
        flag = "--" + o.key.replace("_", "-")
        suffix = "" if o.default is None else f" (default: {o.default})"
        if o.parse is bool:
            parser.add_argument(flag, dest=o.key, action="store_const", const=True,
                                default=None, help=o.help + suffix)
        else:
            parser.add_argument(flag, dest=o.key, type=o.parse, default=None,
                                help=o.help + suffix)
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file of option values; explicit flags win")


def _resolve(args: argparse.Namespace, opts: list) -> dict:
    cfg = {o.key: o.default for o in opts}
    parse_by_key = {o.key: o.parse for o in opts}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise MissingArtifactError(f"config file not found: {path}")
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        for key, value in data.items():
            cfg[key] = value if parse_by_key[key] is bool else parse_by_key[key](value)
    for o in opts:
        value = getattr(args, o.key)
        if value is not None:
            cfg[o.key] = value
    for o in opts:
        if o.required and cfg[o.key] is None:
            raise ConfigError(f"--{o.key.replace('_', '-')} is required")
    return cfg


def _load_manifest(path_str: str):
    root = Path(path_str)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingArtifactError(f"manifest not found: {manifest_path}")
    return load_manifest(manifest_path)


def _score_combo(names: list) -> ScoreCombo:
    return ScoreCombo(
        use_clip="clip" in names,
        use_token_sim="token_sim" in names,
        use_occlusion="occlusion" in names,
    )


def _workers(requested: int) -> int:
    cap = os.environ.get("TTVRS_THREADS")
    if cap is not None:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"TTVRS_THREADS must be an integer, got {cap!r}") from exc
    return max(1, requested)


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = _resolve(args, GEN_OPTS)
    out = Path(cfg["out"])
    if not out.parent.exists():
        raise ConfigError(f"parent of output directory does not exist: {out.parent}")
    dataset_cfg = DatasetConfig(
        out_dir=str(out),
        videos=cfg["videos"],
        negative_fraction=cfg["negatives"],
        windowed_fraction=cfg["windowed"],
        kind_mix=_parse_kind_mix(cfg["kind_mix"]),
        split=cfg["split"],
        width=cfg["width"],
        height=cfg["height"],
        num_frames=cfg["frames"],
        min_size=cfg["min_size"],
        max_size=cfg["max_size"],
        min_objects=cfg["min_objects"],
        max_objects=cfg["max_objects"],
        seed=cfg["seed"],
    )
    manifest = make_dataset(dataset_cfg)
    negatives = sum(1 for e in manifest.entries if e.query.kind == "absent")
    print(f"wrote {len(manifest.entries)} videos ({negatives} negative) to {out}/manifest.json")
    return 0


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["lr"],
        iterations=cfg["iterations"],
        frames_per_clip=cfg["frames_per_clip"],
        warmup_iterations=cfg["warmup"],
        schedule=cfg["schedule"],
        seed=cfg["seed"],
        alpha=cfg["alpha"],
        mask_strategy=cfg["strategy"],
        memory_capacity=cfg["memory_capacity"],
        augment_flips=bool(cfg["augment"]),
        grad_clip=cfg["grad_clip"],
        weights=LossWeights(
            lambda_txt=cfg["lambda_txt"],
            lambda_mask=cfg["lambda_mask"],
            lambda_bce=cfg["lambda_bce"],
            lambda_dice=cfg["lambda_dice"],
            lambda_occ=cfg["lambda_occ"],
        ),
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args, TRAIN_OPTS)
    manifest = _load_manifest(cfg["data"])
    train_cfg = _train_config(cfg)
    model, trace = train(manifest, train_cfg)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        model, out,
        meta={"alpha": train_cfg.alpha, "memory_capacity": train_cfg.memory_capacity},
    )
    trace_path = Path(cfg["trace"]) if cfg["trace"] else out.with_suffix(out.suffix + ".trace.csv")
    write_trace_csv(trace, trace_path)
    final = trace[-1]["loss"] if trace else float("nan")
    print(f"trained {train_cfg.iterations} iterations; final loss {final:.4f}; checkpoint {out}")
    return 0


def _eval_config(cfg: dict, meta: dict) -> EvalConfig:
    alpha = cfg["alpha"] if cfg["alpha"] is not None else float(meta.get("alpha", 0.1))
    capacity = (
        cfg["memory_capacity"]
        if cfg.get("memory_capacity") is not None
        else int(meta.get("memory_capacity", 4))
    )
    return EvalConfig(
        alpha=alpha,
        sampling=SamplingConfig(
            strategy=cfg["sampling"], max_frames=cfg["max_frames"], seed=cfg.get("sampling_seed", 0)
        ),
        combo=_score_combo(_parse_scores(cfg["scores"])),
        decode_strategy=cfg["decode"],
        memory_capacity=capacity,
        boundary_tolerance=cfg["tolerance"],
        hallucination_eps=cfg["eps"],
    )


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve(args, EVAL_OPTS)
    manifest = _load_manifest(cfg["data"])
    oracle = bool(cfg["oracle"])
    if oracle:
        model, meta = SegModel(), {}
    else:
        if cfg["checkpoint"] is None:
            raise ConfigError("--checkpoint is required unless --oracle is given")
        model, meta = load_checkpoint(cfg["checkpoint"])
    eval_cfg = _eval_config(cfg, meta)
    report, _ = evaluate_manifest(
        manifest, model, eval_cfg, oracle=oracle, workers=_workers(cfg["workers"])
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    settings = {
        "alpha": eval_cfg.alpha,
        "sampling": eval_cfg.sampling.strategy,
        "max_frames": eval_cfg.sampling.max_frames,
        "scores": cfg["scores"],
        "decode": eval_cfg.decode_strategy,
        "tolerance": eval_cfg.boundary_tolerance,
        "eps": eval_cfg.hallucination_eps,
        "oracle": oracle,
    }
    write_report_json(report, out / "report.json", settings)
    write_report_csv(report, out / "report.csv")
    agg = " ".join(
        f"{k}={v:.4f}" if v is not None else f"{k}=NA"
        for k, v in (("J", report.mean_j), ("F", report.mean_f), ("JF", report.mean_jf), ("R", report.r))
    )
    print(f"evaluated {len(report.per_video)} videos: {agg}")
    print(f"reports written to {out}/report.json and {out}/report.csv")
    return 0


def _grid_eval(model, manifests: dict, eval_cfg: EvalConfig, workers: int) -> dict:
    cells = {}
    for label, manifest in manifests.items():
        if manifest is None:
            cells[label] = (None, None, None)
            continue
        report, _ = evaluate_manifest(manifest, model, eval_cfg, workers=workers)
        cells[label] = (report.mean_j, report.mean_f, report.mean_jf)
    return cells


def _write_grid(path: Path, key_cols: list, rows: list) -> None:
    fmt = lambda v: "NA" if v is None else f"{v:.6f}"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(key_cols + ["J_attr", "F_attr", "JF_attr", "J_rel", "F_rel", "JF_rel"])
        for keys, attr, rel in rows:
            writer.writerow(list(keys) + [fmt(v) for v in attr] + [fmt(v) for v in rel])


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, ABLATE_OPTS)
    grid = cfg["grid"]
    if grid not in ("alpha", "tks", "decode", "sampling"):
        raise ConfigError(f"unknown grid {grid!r}")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    workers = _workers(cfg["workers"])
    manifests = {
        "attr": _load_manifest(cfg["eval_attr"]),
        "rel": _load_manifest(cfg["eval_rel"]) if cfg["eval_rel"] else None,
    }

    def base_eval(alpha: float, meta: dict | None = None, **overrides) -> EvalConfig:
        merged = {
            "alpha": alpha,
            "max_frames": cfg["max_frames"],
            "sampling": overrides.get("sampling", "anchor"),
            "sampling_seed": 0,
            "scores": overrides.get("scores", "token_sim,occlusion"),
            "decode": overrides.get("decode", "memory"),
            "memory_capacity": None,
            "tolerance": 1,
            "eps": 1e-3,
        }
        return _eval_config(merged, meta or {})

    rows = []
    if grid == "alpha":
        if cfg["data"] is None:
            raise ConfigError("--data is required for the alpha grid")
        train_manifest = _load_manifest(cfg["data"])
        for alpha in _parse_floats(cfg["alphas"]):
            tcfg = TrainConfig(
                learning_rate=cfg["lr"], iterations=cfg["iterations"],
                frames_per_clip=cfg["frames_per_clip"], warmup_iterations=cfg["warmup"],
                seed=cfg["seed"], alpha=alpha,
            )
            model, _ = train(train_manifest, tcfg)
            save_checkpoint(model, out / f"alpha_{alpha:g}.ttvrs",
                            meta={"alpha": alpha, "memory_capacity": tcfg.memory_capacity})
            cells = _grid_eval(model, manifests, base_eval(alpha), workers)
            rows.append(([f"{alpha:g}"], cells["attr"], cells["rel"]))
        _write_grid(out / "ablate_alpha.csv", ["alpha"], rows)
    elif grid == "tks":
        if cfg["checkpoint"] is None:
            raise MissingArtifactError("tks grid needs --checkpoint")
        model, meta = load_checkpoint(cfg["checkpoint"])
        combos = [
            ("clip,token_sim,occlusion",),
            ("clip,token_sim",),
            ("clip,occlusion",),
            ("token_sim,occlusion",),
        ]
        for (names,) in combos:
            eval_cfg = base_eval(None, meta, scores=names)
            cells = _grid_eval(model, manifests, eval_cfg, workers)
            rows.append(([names], cells["attr"], cells["rel"]))
        _write_grid(out / "ablate_tks.csv", ["scores"], rows)
    elif grid == "decode":
        if cfg["data"] is None:
            raise ConfigError("--data is required for the decode grid")
        train_manifest = _load_manifest(cfg["data"])
        for strategy in ("single", "multi"):
            tcfg = TrainConfig(
                learning_rate=cfg["lr"], iterations=cfg["iterations"],
                frames_per_clip=cfg["frames_per_clip"], warmup_iterations=cfg["warmup"],
                seed=cfg["seed"], mask_strategy=strategy,
            )
            model, _ = train(train_manifest, tcfg)
            save_checkpoint(model, out / f"decode_{strategy}.ttvrs",
                            meta={"alpha": tcfg.alpha, "memory_capacity": tcfg.memory_capacity})
            for infer in ("independent", "memory"):
                cells = _grid_eval(model, manifests, base_eval(tcfg.alpha, decode=infer), workers)
                rows.append(([strategy, infer], cells["attr"], cells["rel"]))
        _write_grid(out / "ablate_decode.csv", ["train_strategy", "infer_strategy"], rows)
    else:  # sampling
        if cfg["checkpoint"] is None:
            raise MissingArtifactError("sampling grid needs --checkpoint")
        model, meta = load_checkpoint(cfg["checkpoint"])
        for strategy in ("random", "uniform", "anchor"):
            eval_cfg = base_eval(None, meta, sampling=strategy)
            cells = _grid_eval(model, manifests, eval_cfg, workers)
            rows.append(([strategy], cells["attr"], cells["rel"]))
        _write_grid(out / "ablate_sampling.csv", ["sampling"], rows)
    print(f"wrote {out / ('ablate_' + grid + '.csv')} ({len(rows)} rows)")
    return 0


def cmd_visualize(args: argparse.Namespace) -> int:
    cfg = _resolve(args, VIS_OPTS)
    if cfg["mode"] not in ("pca", "mask"):
        raise ConfigError(f"unknown visualize mode {cfg['mode']!r}")
    manifest = _load_manifest(cfg["data"])
    model, meta = load_checkpoint(cfg["checkpoint"])
    eval_cfg = _eval_config(
        {
            "alpha": cfg["alpha"], "max_frames": cfg["max_frames"], "sampling": "anchor",
            "sampling_seed": 0, "scores": "token_sim,occlusion", "decode": "memory",
            "memory_capacity": None, "tolerance": 1, "eps": 1e-3,
        },
        meta,
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    limit = cfg["limit"] or len(manifest.entries)
    count = 0
    for idx, entry in enumerate(manifest.entries[:limit]):
        clip, _ = load_entry(manifest, entry)
        vid = f"vid_{idx:04d}"
        result = run_video(clip, entry.query, model, eval_cfg)
        for t in range(clip.num_frames):
            if cfg["mode"] == "pca":
                with torch.no_grad():
                    feats = encode_frames(clip, [t], model.encoder).maps[0]
                    emb = model.decoder.mask_embeddings(feats).cpu().numpy()
                overlay = pca_visualize(emb, clip.frames[t], strength=cfg["strength"])
            else:
                heat = result.masklet.masks[t].astype(np.float64)
                overlay = blend_heat(clip.frames[t], heat, strength=cfg["strength"])
            write_ppm(out / f"vis_{vid}_{t:04d}.ppm", overlay.transpose(1, 2, 0))
            count += 1
    print(f"wrote {count} overlay frames to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttvrs",
        description="Moving-shape video segmentation from structured queries: "
        "data generation, training, evaluation, ablation grids, and overlays.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts, func, desc in (
        ("gen-data", GEN_OPTS, cmd_gen_data, "generate a synthetic dataset split"),
        ("train", TRAIN_OPTS, cmd_train, "train a model on a generated dataset"),
        ("eval", EVAL_OPTS, cmd_eval, "evaluate a checkpoint and write metric reports"),
        ("ablate", ABLATE_OPTS, cmd_ablate, "run one of the ablation grids"),
        ("visualize", VIS_OPTS, cmd_visualize, "write per-frame overlay images"),
    ):
        p = sub.add_parser(name, help=desc, description=desc,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_opts(p, opts)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    torch.set_num_threads(1)  # keeps runs bit-reproducible
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
