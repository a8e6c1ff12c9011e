import numpy as np
import pytest
import torch

from ttvrs.encoder import (
    FRAME_TOKEN_ID,
    VIDEO_TOKEN_ID,
    Encoder,
    ModelConfig,
    RawTokenSet,
    encode_frames,
    encode_tokens,
    project_tokens,
    query_feature_vector,
    template_token_ids,
)
from ttvrs.errors import ValidationError
from ttvrs.synthetic import Query, VideoClip

MICRO = ModelConfig(
    frame_height=16,
    frame_width=16,
    feat_channels=8,
    raw_token_dim=12,
    token_dim=8,
    query_emb_dim=6,
    text_context_dim=8,
)


def make_clip(rng, t=4, h=16, w=16):
    return VideoClip(rng.integers(0, 256, size=(t, 3, h, w), dtype=np.uint8))


def make_encoder(seed=0, cfg=MICRO):
    enc = Encoder(cfg)
    gen = torch.Generator().manual_seed(seed)
    for _, p in sorted(enc.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            p.uniform_(-0.1, 0.1, generator=gen)
    return enc


QUERY = Query(kind="attribute", color_id=2, target_index=0)


def test_zero_frames_zero_bias_give_zero_features():
    enc = make_encoder()
    with torch.no_grad():
        enc.conv1.bias.zero_()
        enc.conv2.bias.zero_()
    clip = VideoClip(np.zeros((2, 3, 16, 16), dtype=np.uint8))
    feats = encode_frames(clip, [0, 1], enc)
    assert torch.equal(feats.maps, torch.zeros_like(feats.maps))
    assert torch.equal(feats.pooled, torch.zeros_like(feats.pooled))


def test_identical_frames_identical_features():
    rng = np.random.default_rng(1)
    frame = rng.integers(0, 256, size=(3, 16, 16), dtype=np.uint8)
    clip = VideoClip(np.stack([frame, frame, frame]))
    feats = encode_frames(clip, [0, 2], make_encoder())
    assert torch.equal(feats.maps[0], feats.maps[1])


def test_features_independent_of_requested_subset():
    clip = make_clip(np.random.default_rng(2))
    enc = make_encoder()
    all_feats = encode_frames(clip, range(4), enc)
    solo = encode_frames(clip, [2], enc)
    assert torch.equal(all_feats.maps[2], solo.maps[0])


def test_pooled_matches_direct_summation_oracle():
    clip = make_clip(np.random.default_rng(3))
    feats = encode_frames(clip, range(4), make_encoder())
    maps = feats.maps.detach().numpy().astype(np.float64)
    n, c, h, w = maps.shape
    for i in range(n):
        for ch in range(c):
            acc = 0.0
            for r in range(h):
                for col in range(w):
                    acc += maps[i, ch, r, col]
            assert abs(feats.pooled[i, ch].item() - acc / (h * w)) < 1e-6


def test_feature_shapes_follow_stride():
    clip = make_clip(np.random.default_rng(4))
    feats = encode_frames(clip, [0], make_encoder())
    assert feats.maps.shape == (1, 8, 4, 4)
    assert feats.pooled.shape == (1, 8)


def test_out_of_range_index_rejected():
    clip = make_clip(np.random.default_rng(5))
    with pytest.raises(ValidationError):
        encode_frames(clip, [4], make_encoder())


def test_single_frame_gives_single_token_row():
    clip = make_clip(np.random.default_rng(6), t=1)
    enc = make_encoder()
    feats = encode_frames(clip, [0], enc)
    raw, logits = encode_tokens(feats, QUERY, enc)
    assert raw.frame_tokens.shape[0] == 1
    assert raw.video_token.shape == (1, MICRO.raw_token_dim)
    assert logits.shape == (MICRO.answer_len + 1 + 1, MICRO.vocab_size)


def test_permuting_frames_permutes_frame_tokens():
    clip = make_clip(np.random.default_rng(7), t=5)
    enc = make_encoder()
    order = [3, 0, 4, 1, 2]
    raw_a, _ = encode_tokens(encode_frames(clip, range(5), enc), QUERY, enc)
    raw_b, _ = encode_tokens(encode_frames(clip, order, enc), QUERY, enc)
    assert torch.equal(raw_a.frame_tokens[order], raw_b.frame_tokens)
    # the video token reads a frame mean: permutation-invariant up to rounding
    assert torch.allclose(raw_a.video_token, raw_b.video_token, atol=1e-6)


def test_distinct_queries_give_distinct_video_tokens():
    clip = make_clip(np.random.default_rng(8))
    enc = make_encoder()
    feats = encode_frames(clip, range(4), enc)
    raw_a, _ = encode_tokens(feats, Query(kind="attribute", color_id=1, target_index=0), enc)
    raw_b, _ = encode_tokens(feats, Query(kind="attribute", color_id=5, target_index=0), enc)
    assert not torch.allclose(raw_a.video_token, raw_b.video_token)


def test_seg_row_locality_under_pixel_change():
    rng = np.random.default_rng(9)
    frames = rng.integers(0, 256, size=(4, 3, 16, 16), dtype=np.uint8)
    changed = frames.copy()
    changed[2, :, 5:9, 5:9] = 255 - changed[2, :, 5:9, 5:9]
    enc = make_encoder()
    raw_a, _ = encode_tokens(encode_frames(VideoClip(frames), range(4), enc), QUERY, enc)
    raw_b, _ = encode_tokens(encode_frames(VideoClip(changed), range(4), enc), QUERY, enc)
    for i in (0, 1, 3):
        assert torch.equal(raw_a.frame_tokens[i], raw_b.frame_tokens[i])
    assert not torch.equal(raw_a.frame_tokens[2], raw_b.frame_tokens[2])


def test_project_zero_input_zero_bias_mlp():
    enc = make_encoder()
    with torch.no_grad():
        for layer in enc.projector:
            layer.bias.zero_()
    raw = RawTokenSet(
        frame_tokens=torch.zeros(3, MICRO.raw_token_dim),
        video_token=torch.zeros(1, MICRO.raw_token_dim),
    )
    proj = project_tokens(raw, enc)
    assert torch.equal(proj.frame_tokens, torch.zeros(3, MICRO.token_dim))
    assert torch.equal(proj.video_token, torch.zeros(1, MICRO.token_dim))


def test_identity_single_layer_projection():
    cfg = ModelConfig(
        frame_height=16, frame_width=16, feat_channels=8, raw_token_dim=8,
        token_dim=8, query_emb_dim=6, text_context_dim=8, projection_layers=1,
    )
    enc = Encoder(cfg)
    with torch.no_grad():
        enc.projector[0].weight.copy_(torch.eye(8))
        enc.projector[0].bias.zero_()
    rows = torch.randn(4, 8)
    raw = RawTokenSet(frame_tokens=rows, video_token=rows[:1])
    proj = project_tokens(raw, enc)
    assert torch.allclose(proj.frame_tokens, rows, atol=1e-7)


def test_two_layer_projection_matches_matmul_oracle():
    enc = make_encoder(seed=11)
    vec = torch.randn(1, MICRO.raw_token_dim, dtype=torch.float64)
    enc = enc.double()
    out = enc.project_rows(vec).detach().numpy()[0]
    w1 = enc.projector[0].weight.detach().numpy()
    b1 = enc.projector[0].bias.detach().numpy()
    w2 = enc.projector[1].weight.detach().numpy()
    b2 = enc.projector[1].bias.detach().numpy()
    expected = w2 @ np.tanh(w1 @ vec.numpy()[0] + b1) + b2
    assert np.allclose(out, expected, atol=1e-6)


def test_projection_is_rowwise_exact():
    enc = make_encoder(seed=12)
    a = torch.randn(3, MICRO.raw_token_dim)
    b = torch.randn(5, MICRO.raw_token_dim)
    cat = enc.project_rows(torch.cat([a, b]))
    sep = torch.cat([enc.project_rows(a), enc.project_rows(b)])
    assert torch.equal(cat, sep)


def test_outputs_finite_for_finite_inputs():
    clip = make_clip(np.random.default_rng(13))
    enc = make_encoder(seed=13)
    feats = encode_frames(clip, range(4), enc)
    raw, logits = encode_tokens(feats, QUERY, enc)
    proj = project_tokens(raw, enc)
    for t in (feats.maps, feats.pooled, raw.frame_tokens, raw.video_token,
              logits, proj.frame_tokens, proj.video_token):
        assert torch.isfinite(t).all()


def test_template_token_ids_layout():
    ids = template_token_ids(QUERY, num_frames=5, cfg=MICRO)
    assert ids.shape == (MICRO.answer_len + 5 + 1,)
    assert (ids[MICRO.answer_len : MICRO.answer_len + 5] == FRAME_TOKEN_ID).all()
    assert ids[-1] == VIDEO_TOKEN_ID


def test_absent_query_encodes_like_attribute():
    absent = query_feature_vector(Query(kind="absent", color_id=3))
    attr = query_feature_vector(Query(kind="attribute", color_id=3, target_index=0))
    assert torch.equal(absent, attr)


def test_encode_tokens_rejects_empty_features():
    clip = make_clip(np.random.default_rng(14))
    enc = make_encoder()
    feats = encode_frames(clip, [], enc)
    with pytest.raises(ValidationError):
        encode_tokens(feats, QUERY, enc)
