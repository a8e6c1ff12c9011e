"""Procedural moving-shape videos with exact ground-truth masklets.

A scene is a list of colored shapes (disk, square, triangle) following
piecewise-linear trajectories over a black background. Shapes are
rasterized with hard analytic edges (no anti-aliasing) so every mask is an
exact function of the scene geometry; later objects in the list draw on
top of earlier ones and the target masklet records only the visible pixels
of the target.

Queries are structured predicates standing in for free-form referring
expressions: match by color attribute, by spatial order (left to right),
by motion rank (fastest first), or deliberately match nothing (negative
samples). Every generated artifact is a pure function of the configured
seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .netpbm import read_pgm, read_ppm, write_pgm, write_ppm

SHAPES = ("disk", "square", "triangle")
QUERY_KINDS = ("attribute", "spatial_order", "motion_rank", "absent")

# The non-black corners of the RGB cube: maximally separated hues so color
# identity is linearly decodable from pixels on the black background.
PALETTE = np.array(
    [
        (255, 0, 0),      # 0 red
        (0, 255, 0),      # 1 green
        (0, 0, 255),      # 2 blue
        (255, 255, 0),    # 3 yellow
        (255, 0, 255),    # 4 magenta
        (0, 255, 255),    # 5 cyan
        (255, 255, 255),  # 6 white
    ],
    dtype=np.uint8,
)

MANIFEST_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class ObjectSpec:
    """One shape in a scene.

    `waypoints` maps frame index to center position (x, y); positions
    between waypoints are linearly interpolated and held constant outside
    the waypoint range. `visible_range` is inclusive on both ends.
    `speed_rank` is 1 for the fastest object in the scene.
    """

    shape: str
    color_id: int
    size: int
    waypoints: tuple[tuple[int, tuple[float, float]], ...]
    speed_rank: int = 1
    visible_range: tuple[int, int] = (0, 0)

    def center(self, frame: int) -> tuple[float, float]:
        pts = self.waypoints
        if frame <= pts[0][0]:
            return pts[0][1]
        if frame >= pts[-1][0]:
            return pts[-1][1]
        for (t0, p0), (t1, p1) in zip(pts, pts[1:]):
            if t0 <= frame <= t1:
                if t1 == t0:
                    return p1
                u = (frame - t0) / (t1 - t0)
                return (p0[0] + u * (p1[0] - p0[0]), p0[1] + u * (p1[1] - p0[1]))
        return pts[-1][1]

    def visible(self, frame: int) -> bool:
        lo, hi = self.visible_range
        return lo <= frame <= hi


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    num_frames: int
    objects: tuple[ObjectSpec, ...]
    seed: int = 0

    def validate(self) -> None:
        if self.width < 16 or self.height < 16:
            raise ValidationError("scene dimensions must be at least 16x16")
        if self.num_frames < 1:
            raise ValidationError("scene needs at least one frame")
        for i, obj in enumerate(self.objects):
            if obj.shape not in SHAPES:
                raise ValidationError(f"object {i}: unknown shape {obj.shape!r}")
            if not 0 <= obj.color_id < len(PALETTE):
                raise ValidationError(f"object {i}: color id {obj.color_id} out of palette")
            if obj.size >= min(self.width, self.height) / 2:
                raise ValidationError(f"object {i}: size {obj.size} too large for frame")
            if obj.size < 2:
                raise ValidationError(f"object {i}: size {obj.size} too small")
            lo, hi = obj.visible_range
            if not (0 <= lo <= hi < self.num_frames):
                raise ValidationError(f"object {i}: visible range {obj.visible_range} outside clip")
            if not obj.waypoints:
                raise ValidationError(f"object {i}: empty trajectory")


@dataclass(frozen=True)
class Query:
    """A structured stand-in for a referring expression.

    kind=attribute selects the unique object of `color_id`; spatial_order
    selects the `rank`-th object from the left; motion_rank the `rank`-th
    fastest. kind=absent carries a color matched by no object and has no
    target. `target_index` is ground-truth bookkeeping, never a model
    input.
    """

    kind: str
    color_id: int | None = None
    rank: int | None = None
    target_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in QUERY_KINDS:
            raise ValidationError(f"unknown query kind {self.kind!r}")
        if (self.kind == "absent") != (self.target_index is None):
            raise ValidationError("target_index must be empty exactly for absent queries")
        if self.kind in ("attribute", "absent") and self.color_id is None:
            raise ValidationError(f"{self.kind} query needs a color_id")
        if self.kind in ("spatial_order", "motion_rank") and (self.rank is None or self.rank < 1):
            raise ValidationError(f"{self.kind} query needs a rank >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "color_id": self.color_id,
            "rank": self.rank,
            "target_index": self.target_index,
        }

    @staticmethod
    def from_dict(d: dict) -> "Query":
        return Query(
            kind=d["kind"],
            color_id=d.get("color_id"),
            rank=d.get("rank"),
            target_index=d.get("target_index"),
        )


@dataclass(frozen=True)
class VideoClip:
    """Rendered frames, shape (T, 3, H, W), uint8."""

    frames: np.ndarray

    def __post_init__(self) -> None:
        f = self.frames
        if f.ndim != 4 or f.shape[1] != 3 or f.dtype != np.uint8:
            raise ValidationError(f"frames must be (T, 3, H, W) uint8, got {f.shape} {f.dtype}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    @property
    def width(self) -> int:
        return self.frames.shape[3]


@dataclass(frozen=True)
class Masklet:
    """Per-frame binary masks, shape (T, H, W), values {0, 1}."""

    masks: np.ndarray

    def __post_init__(self) -> None:
        m = self.masks
        if m.ndim != 3:
            raise ValidationError(f"masks must be (T, H, W), got {m.shape}")
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValidationError("mask values must be in {0, 1}")


def rasterize_shape(shape: str, size: int, cx: float, cy: float, height: int, width: int) -> np.ndarray:
    """Exact hard-edged rasterization of one shape; returns bool (H, W).

    Pixel (r, c) is sampled at coordinates (x=c, y=r). Boundary pixels use
    closed (<=) comparisons so re-rasterizing is a usable analytic oracle.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    half = size / 2.0
    if shape == "disk":
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= half * half
    if shape == "square":
        return (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= half)
    if shape == "triangle":
        # Upward isosceles triangle inscribed in the size x size box.
        ax, ay = cx, cy - half          # apex
        bx, by = cx - half, cy + half   # bottom-left
        tx, ty = cx + half, cy + half   # bottom-right
        def side(px, py, qx, qy):
            return (qx - px) * (yy - py) - (qy - py) * (xx - px)
        d0 = side(ax, ay, bx, by)
        d1 = side(bx, by, tx, ty)
        d2 = side(tx, ty, ax, ay)
        # Same-sign test is winding-agnostic; zeros (edges) count as inside.
        return ((d0 >= 0) & (d1 >= 0) & (d2 >= 0)) | ((d0 <= 0) & (d1 <= 0) & (d2 <= 0))
    raise ValidationError(f"unknown shape {shape!r}")


def object_mask(obj: ObjectSpec, frame: int, height: int, width: int) -> np.ndarray:
    """Full (unoccluded) extent of `obj` at `frame`; empty when invisible."""
    if not obj.visible(frame):
        return np.zeros((height, width), dtype=bool)
    cx, cy = obj.center(frame)
    return rasterize_shape(obj.shape, obj.size, cx, cy, height, width)


def mean_center_x(obj: ObjectSpec, num_frames: int) -> float:
    lo, hi = obj.visible_range
    xs = [obj.center(t)[0] for t in range(lo, min(hi, num_frames - 1) + 1)]
    return float(np.mean(xs))


def mean_displacement(obj: ObjectSpec, num_frames: int) -> float:
    """Mean per-frame centroid displacement over the visible range."""
    lo, hi = obj.visible_range
    hi = min(hi, num_frames - 1)
    if hi - lo < 1:
        return 0.0
    total = 0.0
    for t in range(lo, hi):
        x0, y0 = obj.center(t)
        x1, y1 = obj.center(t + 1)
        total += math.hypot(x1 - x0, y1 - y0)
    return total / (hi - lo)


def resolve_target(spec: SceneSpec, query: Query) -> int | None:
    """Index of the unique object satisfying `query`, or None for absent.

    Raises ValidationError when the query is inconsistent with the scene
    (no match, multiple matches, or a tie in the queried ordering).
    """
    objs = spec.objects
    if query.kind == "attribute":
        hits = [i for i, o in enumerate(objs) if o.color_id == query.color_id]
        if len(hits) != 1:
            raise ValidationError(
                f"attribute query on color {query.color_id} matches {len(hits)} objects"
            )
        return hits[0]
    if query.kind == "absent":
        hits = [i for i, o in enumerate(objs) if o.color_id == query.color_id]
        if hits:
            raise ValidationError(f"absent query color {query.color_id} matches an object")
        return None
    if query.kind == "spatial_order":
        keys = [mean_center_x(o, spec.num_frames) for o in objs]
        order = sorted(range(len(objs)), key=lambda i: keys[i])
        reverse = False
    else:  # motion_rank
        keys = [mean_displacement(o, spec.num_frames) for o in objs]
        order = sorted(range(len(objs)), key=lambda i: -keys[i])
        reverse = True
    if query.rank is None or not 1 <= query.rank <= len(objs):
        raise ValidationError(f"rank {query.rank} out of range for {len(objs)} objects")
    ranked = sorted(keys, reverse=reverse)
    if len(set(ranked)) != len(ranked):
        raise ValidationError(f"{query.kind} ordering is not strict")
    return order[query.rank - 1]


def generate_video(spec: SceneSpec, query: Query) -> tuple[VideoClip, Masklet]:
    """Render a scene and the query target's visible-pixel masklet.

    Negative (absent) queries yield an all-zero masklet. Deterministic:
    the output is a pure function of (spec, query).
    """
    spec.validate()
    target = resolve_target(spec, query)
    if query.target_index is not None and query.target_index != target:
        raise ValidationError(
            f"query target_index {query.target_index} does not match resolved target {target}"
        )
    h, w, t_frames = spec.height, spec.width, spec.num_frames
    frames = np.zeros((t_frames, 3, h, w), dtype=np.uint8)
    masks = np.zeros((t_frames, h, w), dtype=np.uint8)
    for t in range(t_frames):
        canvas = np.zeros((h, w, 3), dtype=np.uint8)
        extents = [object_mask(o, t, h, w) for o in spec.objects]
        for o, ext in zip(spec.objects, extents):
            canvas[ext] = PALETTE[o.color_id]
        frames[t] = canvas.transpose(2, 0, 1)
        if target is not None:
            vis = extents[target].copy()
            for ext in extents[target + 1 :]:  # later objects occlude
                vis &= ~ext
            masks[t] = vis.astype(np.uint8)
    return VideoClip(frames), Masklet(masks)


# ---------------------------------------------------------------------------
# Random scene construction and dataset materialization
# ---------------------------------------------------------------------------

# Per-frame speed (pixels) by speed rank; ratios keep motion ranks well
# separated even when a bent trajectory shaves the corner displacement.
SPEED_BY_RANK = (2.4, 1.3, 0.7, 0.35)


@dataclass(frozen=True)
class DatasetConfig:
    """Generation parameters for one dataset split."""

    out_dir: str
    videos: int = 40
    negative_fraction: float = 0.1
    windowed_fraction: float = 0.2
    kind_mix: dict = field(default_factory=lambda: {"attribute": 1.0})
    split: str = "train"
    width: int = 64
    height: int = 64
    num_frames: int = 16
    min_objects: int = 2
    max_objects: int = 2
    min_size: int = 18
    max_size: int = 28
    seed: int = 7

    def validate(self) -> None:
        if self.videos < 0:
            raise ValidationError("videos must be >= 0")
        if not 0.0 <= self.negative_fraction <= 1.0:
            raise ValidationError("negative fraction must be in [0, 1]")
        if not 0.0 <= self.windowed_fraction <= 1.0:
            raise ValidationError("windowed fraction must be in [0, 1]")
        if not self.kind_mix or any(w < 0 for w in self.kind_mix.values()):
            raise ValidationError("kind mix must be nonempty with nonnegative weights")
        unknown = set(self.kind_mix) - set(QUERY_KINDS[:3])
        if unknown:
            raise ValidationError(f"kind mix may only contain positive kinds, got {sorted(unknown)}")
        if sum(self.kind_mix.values()) <= 0:
            raise ValidationError("kind mix weights sum to zero")
        if not 1 <= self.min_objects <= self.max_objects <= 4:
            raise ValidationError("object count range must satisfy 1 <= min <= max <= 4")
        if self.min_size > self.max_size:
            raise ValidationError("min_size must be <= max_size")


@dataclass(frozen=True)
class ManifestEntry:
    video: str
    masks: str
    query: Query
    split: str
    num_frames: int
    width: int
    height: int

    def to_dict(self) -> dict:
        return {
            "video": self.video,
            "masks": self.masks,
            "query": self.query.to_dict(),
            "split": self.split,
            "num_frames": self.num_frames,
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    root: str
    format_version: str = MANIFEST_FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "entries": [e.to_dict() for e in self.entries],
        }


def allocate_counts(total: int, weights: dict) -> dict:
    """Largest-remainder allocation of `total` over weighted keys."""
    keys = sorted(weights)
    wsum = sum(weights[k] for k in keys)
    raw = {k: total * weights[k] / wsum for k in keys}
    counts = {k: int(math.floor(raw[k])) for k in keys}
    leftover = total - sum(counts.values())
    by_frac = sorted(keys, key=lambda k: (-(raw[k] - counts[k]), keys.index(k)))
    for k in by_frac[:leftover]:
        counts[k] += 1
    return counts


def _feasible_start(offsets: list[float], lo: float, hi: float, rng: np.random.Generator) -> float | None:
    """Uniform start coordinate keeping every cumulative offset in [lo, hi]."""
    lo_eff = lo - min(offsets)
    hi_eff = hi - max(offsets)
    if lo_eff > hi_eff:
        return None
    return float(rng.uniform(lo_eff, hi_eff))


def _sample_trajectory(
    rng: np.random.Generator,
    speed: float,
    size: int,
    width: int,
    height: int,
    num_frames: int,
) -> tuple[tuple[int, tuple[float, float]], ...]:
    """Straight or bent constant-speed path that keeps the shape in frame."""
    last = num_frames - 1
    bend = num_frames >= 6 and rng.random() < 0.3
    t_mid = num_frames // 2
    for margin in (size / 2 + 1.0, size / 4 + 1.0, 2.0):
        for _ in range(40):
            theta = rng.uniform(0.0, 2.0 * math.pi)
            if bend:
                theta2 = theta + rng.uniform(0.5 * math.pi, 1.5 * math.pi)
                seg1 = (speed * t_mid * math.cos(theta), speed * t_mid * math.sin(theta))
                seg2 = (
                    speed * (last - t_mid) * math.cos(theta2),
                    speed * (last - t_mid) * math.sin(theta2),
                )
                dxs = [0.0, seg1[0], seg1[0] + seg2[0]]
                dys = [0.0, seg1[1], seg1[1] + seg2[1]]
            else:
                dxs = [0.0, speed * last * math.cos(theta)]
                dys = [0.0, speed * last * math.sin(theta)]
            x0 = _feasible_start(dxs, margin, width - 1 - margin, rng)
            y0 = _feasible_start(dys, margin, height - 1 - margin, rng)
            if x0 is None or y0 is None:
                continue
            if bend:
                return (
                    (0, (x0, y0)),
                    (t_mid, (x0 + dxs[1], y0 + dys[1])),
                    (last, (x0 + dxs[2], y0 + dys[2])),
                )
            return ((0, (x0, y0)), (last, (x0 + dxs[1], y0 + dys[1])))
        bend = False  # straight paths have a larger feasible region
    raise ValidationError("could not place a trajectory inside the frame")


def _too_entangled(
    waypoints, size, placed: list, t_frames: int, min_gap: float = 0.6
) -> bool:
    """True when the path would bury one shape inside another for long.

    Centers closer than min_gap * (size_a + size_b) / 2 at any frame count
    as heavy overlap; partial occlusion beyond that range stays allowed.
    """
    probe = ObjectSpec("disk", 0, size, tuple(waypoints), 1, (0, t_frames - 1))
    for other_wp, other_size in placed:
        other = ObjectSpec("disk", 0, other_size, tuple(other_wp), 1, (0, t_frames - 1))
        limit = min_gap * (size + other_size) / 2.0
        for t in range(t_frames):
            ax, ay = probe.center(t)
            bx, by = other.center(t)
            if math.hypot(ax - bx, ay - by) < limit:
                return True
    return False


def build_scene(
    rng: np.random.Generator,
    config: DatasetConfig,
    windowed: bool,
    target_slot: int,
    required_color: int | None = None,
) -> SceneSpec:
    """Random scene; the object at `target_slot` (mod object count) carries
    the windowed visibility and, when given, the required target color."""
    n = int(rng.integers(config.min_objects, config.max_objects + 1))
    colors = rng.choice(len(PALETTE), size=n, replace=False)
    if required_color is not None:
        slot = target_slot % n
        if required_color in colors:
            other = int(np.nonzero(colors == required_color)[0][0])
            colors[other] = colors[slot]
        colors[slot] = required_color
    ranks = rng.permutation(n) + 1
    t_frames = config.num_frames
    objects = []
    placed: list = []
    for i in range(n):
        size = int(rng.integers(config.min_size, config.max_size + 1))
        speed = SPEED_BY_RANK[ranks[i] - 1]
        waypoints = _sample_trajectory(rng, speed, size, config.width, config.height, t_frames)
        for _ in range(30):
            if not _too_entangled(waypoints, size, placed, t_frames):
                break
            waypoints = _sample_trajectory(rng, speed, size, config.width, config.height, t_frames)
        placed.append((waypoints, size))
        if windowed and i == target_slot % n and t_frames >= 4:
            span = int(rng.integers(max(2, t_frames // 4), t_frames // 2 + 1))
            start = int(rng.integers(0, t_frames - span + 1))
            visible = (start, start + span - 1)
        else:
            visible = (0, t_frames - 1)
        objects.append(
            ObjectSpec(
                shape=SHAPES[int(rng.integers(len(SHAPES)))],
                color_id=int(colors[i]),
                size=size,
                waypoints=waypoints,
                speed_rank=int(ranks[i]),
                visible_range=visible,
            )
        )
    return SceneSpec(
        width=config.width,
        height=config.height,
        num_frames=t_frames,
        objects=tuple(objects),
        seed=int(rng.integers(1 << 62)),
    )


def build_query(rng: np.random.Generator, spec: SceneSpec, kind: str) -> Query:
    """Construct a query of `kind` consistent with `spec`."""
    objs = spec.objects
    if kind == "attribute":
        idx = int(rng.integers(len(objs)))
        return Query(kind="attribute", color_id=objs[idx].color_id, target_index=idx)
    if kind == "absent":
        used = {o.color_id for o in objs}
        free = sorted(set(range(len(PALETTE))) - used)
        color = int(free[int(rng.integers(len(free)))])
        return Query(kind="absent", color_id=color)
    rank = int(rng.integers(1, len(objs) + 1))
    target = resolve_target_unchecked(spec, kind, rank)
    return Query(kind=kind, rank=rank, target_index=target)


def resolve_target_unchecked(spec: SceneSpec, kind: str, rank: int) -> int:
    """Target index for an order query, without the query round-trip."""
    if kind == "spatial_order":
        keys = [mean_center_x(o, spec.num_frames) for o in spec.objects]
        order = sorted(range(len(spec.objects)), key=lambda i: keys[i])
    else:
        keys = [mean_displacement(o, spec.num_frames) for o in spec.objects]
        order = sorted(range(len(spec.objects)), key=lambda i: -keys[i])
    return order[rank - 1]


def make_dataset(config: DatasetConfig) -> DatasetManifest:
    """Generate videos and masklets on disk and return the manifest.

    The negative count is exactly round(videos * negative_fraction);
    positives are allocated over the kind mix by largest remainder.
    Rerunning with the same config is byte-identical.
    """
    config.validate()
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc}") from exc
    if not out.is_dir():
        raise ValidationError(f"output path {out} is not a directory")

    n_negative = int(round(config.videos * config.negative_fraction))
    n_positive = config.videos - n_negative
    kind_counts = allocate_counts(n_positive, config.kind_mix)
    n_windowed = int(round(n_positive * config.windowed_fraction))

    # One (kind, windowed) plan per video, shuffled deterministically.
    plan: list[tuple[str, bool]] = []
    pos_kinds = [k for k in sorted(kind_counts) for _ in range(kind_counts[k])]
    for i, kind in enumerate(pos_kinds):
        plan.append((kind, i < n_windowed))
    plan.extend(("absent", False) for _ in range(n_negative))
    master = np.random.default_rng([config.seed, 0xD5])
    master.shuffle(plan)

    entries = []
    attr_count = 0
    for i, (kind, windowed) in enumerate(plan):
        rng = np.random.default_rng([config.seed, i])
        target_slot = int(rng.integers(4))
        required = None
        if kind == "attribute":
            # Round-robin target colors so a small split covers the palette.
            required = attr_count % len(PALETTE)
            attr_count += 1
        scene = build_scene(rng, config, windowed, target_slot, required_color=required)
        if kind == "attribute":
            idx = next(j for j, o in enumerate(scene.objects) if o.color_id == required)
            query = Query(kind="attribute", color_id=required, target_index=idx)
        else:
            # For order/motion kinds the target is set by geometry, so a
            # windowed video's hidden object is not necessarily the target.
            query = build_query(rng, scene, kind)
        clip, masklet = generate_video(scene, query)

        vid = f"vid_{i:04d}"
        video_rel = f"videos/{vid}"
        masks_rel = f"masks/{vid}"
        (out / video_rel).mkdir(parents=True, exist_ok=True)
        (out / masks_rel).mkdir(parents=True, exist_ok=True)
        for t in range(config.num_frames):
            write_ppm(out / video_rel / f"frame_{t:04d}.ppm", clip.frames[t].transpose(1, 2, 0))
            write_pgm(out / masks_rel / f"mask_{t:04d}.pgm", masklet.masks[t])
        entries.append(
            ManifestEntry(
                video=video_rel,
                masks=masks_rel,
                query=query,
                split=config.split,
                num_frames=config.num_frames,
                width=config.width,
                height=config.height,
            )
        )

    manifest = DatasetManifest(entries=tuple(entries), root=str(out))
    save_manifest(manifest, out / "manifest.json")
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise ValidationError(f"unsupported manifest format_version {data.get('format_version')!r}")
    entries = tuple(
        ManifestEntry(
            video=e["video"],
            masks=e["masks"],
            query=Query.from_dict(e["query"]),
            split=e["split"],
            num_frames=e["num_frames"],
            width=e["width"],
            height=e["height"],
        )
        for e in data["entries"]
    )
    return DatasetManifest(entries=entries, root=str(path.parent))


def load_entry(manifest: DatasetManifest, entry: ManifestEntry) -> tuple[VideoClip, Masklet]:
    """Read one manifest entry's frames and masks back from disk."""
    root = Path(manifest.root)
    frames = []
    masks = []
    for t in range(entry.num_frames):
        img = read_ppm(root / entry.video / f"frame_{t:04d}.ppm")
        frames.append(img.transpose(2, 0, 1))
        masks.append(read_pgm(root / entry.masks / f"mask_{t:04d}.pgm"))
    return VideoClip(np.stack(frames)), Masklet(np.stack(masks))
