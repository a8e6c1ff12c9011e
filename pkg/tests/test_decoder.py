import numpy as np
import pytest
import torch

from ttvrs.decoder import MaskDecoder, binarize, decode, upsample_nearest
from ttvrs.encoder import ModelConfig
from ttvrs.errors import ValidationError

MICRO = ModelConfig(
    frame_height=8,
    frame_width=8,
    feat_channels=4,
    raw_token_dim=8,
    token_dim=6,
    query_emb_dim=4,
    text_context_dim=8,
)


def make_decoder(seed=0, cfg=MICRO):
    dec = MaskDecoder(cfg)
    gen = torch.Generator().manual_seed(seed)
    for _, p in sorted(dec.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            p.uniform_(-0.5, 0.5, generator=gen)
    return dec


def test_zero_embedding_zero_bias_gives_zero_outputs():
    dec = make_decoder()
    with torch.no_grad():
        dec.logit_bias.zero_()
        dec.occlusion_head.bias.zero_()
    features = torch.randn(4, 2, 2)
    out = decode(features, torch.zeros(MICRO.token_dim), dec)
    assert torch.equal(out.mask_logits, torch.zeros(8, 8))
    assert out.occlusion_score.item() == 0.0


def test_decode_matches_dense_loop_oracle():
    rng = np.random.default_rng(1)
    for trial in range(10):
        dec = make_decoder(seed=trial).double()
        features = torch.tensor(rng.normal(size=(4, 2, 2)))
        emb = torch.tensor(rng.normal(size=MICRO.token_dim))
        out = decode(features, emb, dec)

        w_f = dec.feature_proj.weight.detach().numpy().reshape(4, 4)
        b_f = dec.feature_proj.bias.detach().numpy()
        w_k = dec.kernel_proj.weight.detach().numpy()
        w_o = dec.occlusion_head.weight.detach().numpy()[0]
        b_o = dec.occlusion_head.bias.detach().numpy()[0]
        f = features.numpy()

        m = np.zeros((4, 2, 2))
        for c_out in range(4):
            for r in range(2):
                for c in range(2):
                    acc = b_f[c_out]
                    for c_in in range(4):
                        acc += w_f[c_out, c_in] * f[c_in, r, c]
                    m[c_out, r, c] = np.tanh(acc)
        kernel = w_k @ emb.numpy()
        low = np.zeros((2, 2))
        for r in range(2):
            for c in range(2):
                low[r, c] = (kernel * m[:, r, c]).sum() + dec.logit_bias.item()
        expected = np.zeros((8, 8))
        for r in range(8):
            for c in range(8):
                expected[r, c] = low[r // 4, c // 4]
        assert np.allclose(out.mask_logits.detach().numpy(), expected, atol=1e-5)

        pooled = m.mean(axis=(1, 2))
        occ = (w_o * (pooled * kernel)).sum() + b_o
        assert abs(out.occlusion_score.item() - occ) < 1e-5


def test_linear_embedding_homogeneity():
    dec = make_decoder(seed=2)
    with torch.no_grad():
        dec.logit_bias.zero_()
    features = torch.randn(4, 2, 2)
    emb = torch.randn(MICRO.token_dim)
    one = decode(features, emb, dec).mask_logits
    two = decode(features, 2.0 * emb, dec).mask_logits
    assert torch.equal(two, 2.0 * one)


def test_decode_is_deterministic_and_local():
    dec = make_decoder(seed=3)
    features = torch.randn(4, 2, 2)
    emb = torch.randn(MICRO.token_dim)
    a = decode(features, emb, dec)
    b = decode(features, emb, dec)
    assert torch.equal(a.mask_logits, b.mask_logits)
    assert torch.equal(a.occlusion_score, b.occlusion_score)


def test_decode_shape_validation():
    dec = make_decoder()
    with pytest.raises(ValidationError):
        decode(torch.randn(3, 2, 2), torch.randn(MICRO.token_dim), dec)
    with pytest.raises(ValidationError):
        decode(torch.randn(4, 2, 2), torch.randn(MICRO.token_dim + 1), dec)


def test_binarize_strongly_negative_logits():
    assert binarize(np.full((4, 4), -100.0)).sum() == 0


def test_binarize_zero_logits_strict_threshold():
    assert binarize(np.zeros((4, 4)), threshold=0.5).sum() == 0


def test_binarize_matches_elementwise_sigmoid_oracle():
    rng = np.random.default_rng(4)
    logits = rng.normal(scale=3.0, size=(6, 6))
    got = binarize(logits, threshold=0.5)
    expected = (1.0 / (1.0 + np.exp(-logits)) > 0.5).astype(np.uint8)
    assert np.array_equal(got, expected)
    assert np.array_equal(binarize(torch.tensor(logits), 0.5), expected)


def test_upsample_nearest_exact_blocks():
    low = torch.tensor([[1.0, 2.0], [3.0, 4.0]])
    up = upsample_nearest(low, 2)
    expected = torch.tensor(
        [[1.0, 1.0, 2.0, 2.0], [1.0, 1.0, 2.0, 2.0], [3.0, 3.0, 4.0, 4.0], [3.0, 3.0, 4.0, 4.0]]
    )
    assert torch.equal(up, expected)


def test_occlusion_gradient_matches_finite_differences():
    dec = make_decoder(seed=5).double()
    features = torch.randn(4, 2, 2, dtype=torch.float64)
    emb = torch.randn(MICRO.token_dim, dtype=torch.float64, requires_grad=True)
    decode(features, emb, dec).occlusion_score.backward()
    step = 1e-5
    for idx in range(emb.shape[0]):
        with torch.no_grad():
            e_hi = emb.detach().clone()
            e_hi[idx] += step
            e_lo = emb.detach().clone()
            e_lo[idx] -= step
            hi = decode(features, e_hi, dec).occlusion_score.item()
            lo = decode(features, e_lo, dec).occlusion_score.item()
        fd = (hi - lo) / (2 * step)
        an = emb.grad[idx].item()
        assert abs(an - fd) <= 1e-4 * max(1.0, abs(an), abs(fd))
