import numpy as np
import pytest

from ttvrs.errors import ValidationError
from ttvrs.metrics import (
    blend_heat,
    boundary_mask,
    contour_accuracy,
    foreground_fraction,
    pca_visualize,
    principal_heat,
    region_similarity,
    robustness,
    score_video,
)


def masklet(*frames):
    return np.stack([np.asarray(f, dtype=np.uint8) for f in frames])


def square_frame(size, r0, c0, side):
    f = np.zeros((size, size), dtype=np.uint8)
    f[r0 : r0 + side, c0 : c0 + side] = 1
    return f


# ---------------------------------------------------------------------------
# Independent brute-force oracles
# ---------------------------------------------------------------------------


def oracle_j(pred, gt):
    values = []
    for t in range(pred.shape[0]):
        inter = union = 0
        for r in range(pred.shape[1]):
            for c in range(pred.shape[2]):
                p, g = bool(pred[t, r, c]), bool(gt[t, r, c])
                inter += p and g
                union += p or g
        values.append(1.0 if union == 0 else inter / union)
    return float(np.mean(values))


def oracle_boundary(mask):
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w) or not mask[rr, cc]:
                    out[r, c] = True
                    break
    return out


def oracle_f(pred, gt, tolerance):
    values = []
    for t in range(pred.shape[0]):
        pb = np.argwhere(oracle_boundary(pred[t]))
        gb = np.argwhere(oracle_boundary(gt[t]))
        if len(pb) == 0 and len(gb) == 0:
            values.append(1.0)
            continue
        if len(pb) == 0 or len(gb) == 0:
            values.append(0.0)
            continue
        def matched(points, targets):
            count = 0
            for p in points:
                best = min(max(abs(int(p[0]) - int(q[0])), abs(int(p[1]) - int(q[1]))) for q in targets)
                count += best <= tolerance
            return count
        precision = matched(pb, gb) / len(pb)
        recall = matched(gb, pb) / len(gb)
        values.append(0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall))
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# region similarity
# ---------------------------------------------------------------------------


def test_j_identical_masks():
    m = masklet(square_frame(16, 4, 4, 6), square_frame(16, 2, 8, 5))
    assert region_similarity(m, m) == 1.0


def test_j_disjoint_masks():
    a = masklet(square_frame(16, 0, 0, 4))
    b = masklet(square_frame(16, 8, 8, 4))
    assert region_similarity(a, b) == 0.0


def test_j_half_coverage_counting_oracle():
    gt = masklet(square_frame(16, 4, 4, 4), square_frame(16, 4, 4, 4))
    pred = gt.copy()
    pred[:, :, 6:] = 0  # keep exactly half of each 4x4 square
    assert gt[0].sum() == 16 and pred[0].sum() == 8
    assert region_similarity(pred, gt) == 0.5
    assert region_similarity(pred, gt) == oracle_j(pred, gt)


def test_j_both_empty_counts_one():
    empty = masklet(np.zeros((8, 8)))
    assert region_similarity(empty, empty) == 1.0


def test_j_dimension_mismatch():
    with pytest.raises(ValidationError):
        region_similarity(masklet(np.zeros((8, 8))), masklet(np.zeros((9, 9))))


# ---------------------------------------------------------------------------
# contour accuracy
# ---------------------------------------------------------------------------


def test_f_identical_masks():
    m = masklet(square_frame(16, 3, 3, 7))
    assert contour_accuracy(m, m, tolerance=0) == 1.0


def test_f_one_pixel_shift_within_tolerance():
    gt = masklet(square_frame(16, 4, 4, 6))
    pred = masklet(square_frame(16, 4, 5, 6))
    assert contour_accuracy(pred, gt, tolerance=1) == 1.0


def test_f_three_pixel_shift_matches_all_pairs_oracle():
    gt = masklet(square_frame(16, 4, 4, 6))
    pred = masklet(square_frame(16, 4, 7, 6))
    got = contour_accuracy(pred, gt, tolerance=1)
    assert got == oracle_f(pred, gt, 1)
    assert got < 1.0


def test_f_random_masks_match_oracle_exactly():
    rng = np.random.default_rng(5)
    for _ in range(25):
        pred = masklet(rng.integers(0, 2, size=(10, 10)))
        gt = masklet(rng.integers(0, 2, size=(10, 10)))
        for tol in (0, 1):
            assert contour_accuracy(pred, gt, tolerance=tol) == oracle_f(pred, gt, tol)


def test_boundary_mask_matches_neighborhood_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        mask = rng.integers(0, 2, size=(9, 11)).astype(np.uint8)
        assert np.array_equal(boundary_mask(mask), oracle_boundary(mask))


def test_f_empty_pred_nonempty_gt_is_zero():
    gt = masklet(square_frame(8, 2, 2, 4))
    pred = masklet(np.zeros((8, 8)))
    assert contour_accuracy(pred, gt, tolerance=1) == 0.0


def test_translation_leaves_j_and_f_unchanged():
    base_p = square_frame(24, 4, 4, 6)
    base_g = square_frame(24, 5, 4, 7)
    for dr, dc in ((3, 2), (7, 9)):
        p2 = np.roll(np.roll(base_p, dr, axis=0), dc, axis=1)
        g2 = np.roll(np.roll(base_g, dr, axis=0), dc, axis=1)
        assert region_similarity(masklet(p2), masklet(g2)) == region_similarity(
            masklet(base_p), masklet(base_g)
        )
        assert contour_accuracy(masklet(p2), masklet(g2), 1) == contour_accuracy(
            masklet(base_p), masklet(base_g), 1
        )


def test_j_f_symmetry():
    rng = np.random.default_rng(8)
    pred = masklet(rng.integers(0, 2, size=(12, 12)))
    gt = masklet(rng.integers(0, 2, size=(12, 12)))
    assert region_similarity(pred, gt) == region_similarity(gt, pred)
    assert contour_accuracy(pred, gt, 1) == contour_accuracy(gt, pred, 1)


# ---------------------------------------------------------------------------
# robustness
# ---------------------------------------------------------------------------


def test_robustness_all_clean():
    zeros = [masklet(np.zeros((8, 8))) for _ in range(4)]
    assert robustness(zeros) == 1.0


def test_robustness_all_hallucinated():
    full = [masklet(np.ones((8, 8))) for _ in range(3)]
    assert robustness(full) == 0.0


def test_robustness_mixed_counting_oracle():
    preds = [masklet(np.zeros((8, 8))) for _ in range(3)] + [masklet(np.ones((8, 8)))]
    assert robustness(preds) == 0.75


def test_robustness_not_applicable_without_negatives():
    assert robustness([]) is None


def test_score_video_jf_identity():
    rng = np.random.default_rng(9)
    pred = masklet(rng.integers(0, 2, size=(10, 10)))
    gt = masklet(rng.integers(0, 2, size=(10, 10)))
    m = score_video("v", pred, gt, negative=False)
    assert m.jf == (m.j + m.f) / 2


# ---------------------------------------------------------------------------
# principal-component overlays
# ---------------------------------------------------------------------------


def test_rank_one_field_recovers_spatial_pattern():
    rng = np.random.default_rng(10)
    c = rng.uniform(0.0, 1.0, size=(4, 4))
    c[np.unravel_index(np.argmax(c), c.shape)] = 2.0  # positive max magnitude
    v = rng.normal(size=6)
    field = c[None, :, :] * v[:, None, None]
    heat = principal_heat(field)
    norm = (c - c.min()) / (c.max() - c.min())
    assert np.allclose(heat, norm, atol=1e-8)


def test_constant_embeddings_give_zero_heat():
    field = np.ones((5, 3, 3)) * 2.5
    assert np.array_equal(principal_heat(field), np.zeros((3, 3)))


def test_principal_component_matches_power_iteration_oracle():
    rng = np.random.default_rng(11)
    field = rng.normal(size=(4, 4, 4))
    heat = principal_heat(field)

    samples = field.reshape(4, 16).T
    centered = samples - samples.mean(axis=0)
    cov = centered.T @ centered
    vec = rng.normal(size=4)
    for _ in range(500):
        vec = cov @ vec
        vec /= np.linalg.norm(vec)
    proj = centered @ vec
    if proj[np.argmax(np.abs(proj))] < 0:
        proj = -proj
    expected = (proj - proj.min()) / (proj.max() - proj.min())
    assert np.allclose(heat, expected.reshape(4, 4), atol=1e-4)


def test_pca_visualize_shapes_and_range():
    rng = np.random.default_rng(12)
    emb = rng.normal(size=(6, 4, 4))
    frame = rng.integers(0, 256, size=(3, 16, 16)).astype(np.uint8)
    overlay = pca_visualize(emb, frame)
    assert overlay.shape == (3, 16, 16)
    assert overlay.dtype == np.uint8


def test_blend_heat_zero_heat_is_identity():
    frame = np.arange(3 * 4 * 4, dtype=np.uint8).reshape(3, 4, 4)
    assert np.array_equal(blend_heat(frame, np.zeros((4, 4))), frame)


def test_foreground_fraction():
    m = masklet(np.eye(8))
    assert foreground_fraction(m) == 8 / 64
