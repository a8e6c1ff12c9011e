import math

import numpy as np
import pytest
import torch

from ttvrs.errors import ValidationError
from ttvrs.losses import (
    LossComponents,
    LossWeights,
    bce_loss,
    dice_loss,
    text_loss,
    total_loss,
)


def test_bce_perfect_saturated_prediction():
    target = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
    logits = torch.where(target > 0, torch.tensor(100.0), torch.tensor(-100.0))
    assert bce_loss(logits, target).item() < 1e-6


def test_bce_uniform_prediction_is_ln2():
    for target in (torch.zeros(3, 3), torch.ones(3, 3), (torch.arange(9).reshape(3, 3) % 2).float()):
        assert abs(bce_loss(torch.zeros(3, 3), target).item() - math.log(2)) < 1e-7


def test_bce_matches_elementwise_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        logits = rng.normal(scale=3.0, size=(3, 3))
        target = rng.integers(0, 2, size=(3, 3)).astype(np.float64)
        p = 1.0 / (1.0 + np.exp(-logits))
        expected = -(target * np.log(p) + (1 - target) * np.log(1 - p)).mean()
        got = bce_loss(torch.tensor(logits), torch.tensor(target)).item()
        assert abs(got - expected) < 1e-6


def test_bce_shape_mismatch():
    with pytest.raises(ValidationError):
        bce_loss(torch.zeros(2, 2), torch.zeros(2, 3))


def test_dice_perfect_prediction_near_zero():
    target = (torch.arange(64).reshape(8, 8) % 2).double()
    logits = torch.where(target > 0, 100.0, -100.0).double()
    assert dice_loss(logits, target).item() < 1e-3


def test_dice_full_prediction_on_empty_target():
    logits = torch.full((8, 8), 100.0, dtype=torch.float64)
    target = torch.zeros(8, 8, dtype=torch.float64)
    assert abs(dice_loss(logits, target).item() - (1.0 - 1.0 / 65.0)) < 1e-6


def test_dice_empty_target_empty_prediction_rescued_by_eps():
    logits = torch.full((8, 8), -100.0, dtype=torch.float64)
    target = torch.zeros(8, 8, dtype=torch.float64)
    assert dice_loss(logits, target).item() < 1e-6


def test_dice_stays_in_unit_interval():
    rng = np.random.default_rng(1)
    for _ in range(50):
        logits = torch.tensor(rng.normal(scale=5.0, size=(6, 6)))
        target = torch.tensor(rng.integers(0, 2, size=(6, 6)).astype(np.float64))
        v = dice_loss(logits, target).item()
        assert 0.0 <= v <= 1.0


def test_text_loss_one_hot_correct():
    ids = torch.tensor([3, 1, 2, 0])
    logits = torch.full((4, 8), -50.0)
    logits[torch.arange(4), ids] = 50.0
    assert text_loss(logits, ids).item() < 1e-6


def test_text_loss_uniform_is_log_vocab():
    logits = torch.zeros(5, 32)
    ids = torch.tensor([0, 5, 9, 31, 2])
    assert abs(text_loss(logits, ids).item() - math.log(32)) < 1e-6


def test_text_loss_matches_softmax_oracle():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(4, 12))
    ids = rng.integers(0, 12, size=4)
    expected = 0.0
    for row, target in zip(logits, ids):
        probs = np.exp(row - row.max())
        probs /= probs.sum()
        expected -= math.log(probs[target])
    expected /= 4
    got = text_loss(torch.tensor(logits), torch.tensor(ids)).item()
    assert abs(got - expected) < 1e-6


def test_text_loss_length_mismatch():
    with pytest.raises(ValidationError):
        text_loss(torch.zeros(3, 8), torch.tensor([0, 1]))


def components(txt, bce, dice, occ):
    mk = lambda v: torch.tensor(v, dtype=torch.float64)
    return LossComponents(txt=mk(txt), bce=mk(bce), dice=mk(dice), occ=mk(occ))


def test_total_loss_default_weighting_example():
    weights = LossWeights(lambda_txt=1.0, lambda_mask=1.0, lambda_bce=2.0, lambda_dice=0.5, lambda_occ=1.0)
    value = total_loss(components(0.0, 0.1, 0.2, 0.0), weights).item()
    assert abs(value - 0.3) < 1e-12


def test_total_loss_zero_components():
    assert total_loss(components(0.0, 0.0, 0.0, 0.0), LossWeights()).item() == 0.0


def test_total_loss_matches_hand_expansion():
    rng = np.random.default_rng(3)
    for _ in range(20):
        t, b, d, o = rng.uniform(0, 2, size=4)
        w = LossWeights(*rng.uniform(0, 3, size=5))
        expected = w.lambda_txt * t + w.lambda_mask * (w.lambda_bce * b + w.lambda_dice * d) + w.lambda_occ * o
        got = total_loss(components(t, b, d, o), w).item()
        assert abs(got - expected) < 1e-9


def test_total_loss_monotone_in_components():
    w = LossWeights()
    base = total_loss(components(0.5, 0.5, 0.5, 0.5), w).item()
    for bump in ("txt", "bce", "dice", "occ"):
        vals = {"txt": 0.5, "bce": 0.5, "dice": 0.5, "occ": 0.5}
        vals[bump] = 0.9
        assert total_loss(components(**vals), w).item() >= base


def test_negative_weights_rejected():
    with pytest.raises(ValidationError):
        LossWeights(lambda_dice=-1.0)
