import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dense_fuse, square_mask
from sportfield.core import (
    BODY_PARTS,
    DomainError,
    FieldSet,
    GridSpec,
    Keypoint,
    KeypointType,
    Scene,
    Skeleton,
)
from sportfield.decode import (
    DecodeConfig,
    assemble_skeletons,
    decode,
    detect_ball,
    detect_centers,
    fuse_all,
    fuse_highres,
    group_instances,
    local_maxima,
)
from sportfield.encode import encode
from sportfield.harness.synth import SynthConfig, synth_scene

G = GridSpec(64, 48, 8)


def _single_source(sigma=2.0):
    conf = np.zeros(G.low_shape)
    loc = np.zeros(G.low_shape + (2,))
    sig = np.ones(G.low_shape)
    conf[2, 2] = 1.0
    sig[2, 2] = sigma
    return conf, loc, sig  # target point (20, 20)


def test_fuse_single_source():
    m = fuse_highres(*_single_source(), G)
    assert m[20, 20] == 1.0
    assert m[22, 20] == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert m[20, 22] == pytest.approx(0.6065, abs=1e-4)
    assert m.max() == 1.0


def test_fuse_two_sources_same_target():
    conf, loc, sig = _single_source()
    conf[2, 3] = 1.0
    sig[2, 3] = 2.0
    loc[2, 3] = (-8.0, 0.0)
    assert fuse_highres(conf, loc, sig, G)[20, 20] == pytest.approx(2.0)


def test_fuse_rejects_bad_sigma():
    conf, loc, sig = _single_source()
    sig[2, 2] = 0.0
    with pytest.raises(DomainError):
        fuse_highres(conf, loc, sig, G)


def test_fuse_truncation_radius():
    m = fuse_highres(*_single_source(sigma=2.0), G, truncation=3.0)
    assert m[20, 26] > 0  # exactly 3 sigma: kept
    assert m[20, 27] == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 5.0))
def test_fuse_linearity(seed, a):
    rng = np.random.default_rng(seed)
    conf = rng.random(G.low_shape) * (rng.random(G.low_shape) < 0.3)
    loc = rng.normal(0, 4, G.low_shape + (2,))
    sig = rng.uniform(0.5, 4, G.low_shape)
    base = fuse_highres(conf, loc, sig, G)
    np.testing.assert_allclose(fuse_highres(a * conf, loc, sig, G), a * base, rtol=1e-12, atol=1e-14)


def test_fuse_infinite_truncation_matches_dense():
    rng = np.random.default_rng(2)
    conf = rng.random(G.low_shape) * (rng.random(G.low_shape) < 0.2)
    loc = rng.normal(0, 4, G.low_shape + (2,))
    sig = rng.uniform(0.5, 4, G.low_shape)
    exact = fuse_highres(conf, loc, sig, G, truncation=math.inf)
    np.testing.assert_allclose(exact, dense_fuse(conf, loc, sig, G), rtol=0, atol=1e-12)


def test_detect_ball_examples():
    kp = detect_ball(np.zeros((10, 12)))
    assert (kp.x, kp.y, kp.confidence) == (0.0, 0.0, 0.0)
    m = np.zeros((10, 12))
    m[3, 4], m[7, 9] = 0.9, 0.8
    kp = detect_ball(m)
    assert (kp.x, kp.y) == (4.0, 3.0) and kp.confidence == 0.9


def test_detect_ball_encoded():
    g = GridSpec(128, 128, 8)
    ball = square_mask(48, 58, 5, g.width, -1)  # centroid (50, 60)
    fields = encode(Scene(g, ball))
    kp = detect_ball(fuse_all(fields)[KeypointType.BALL])
    assert math.hypot(kp.x - 50, kp.y - 60) <= 0.5
    assert kp.confidence >= 1.0


def test_detect_centers_examples():
    assert detect_centers(np.zeros((20, 20))) == []
    m = np.zeros((20, 20))
    m[10, 5], m[10, 8] = 0.9, 0.8
    c = detect_centers(m, DecodeConfig(nms_radius=8), radius=8.0)
    assert len(c) == 1 and (c[0].x, c[0].y) == (5.0, 10.0)
    assert len(detect_centers(m, radius=2.0)) == 2


def test_detect_centers_encoded_players():
    g = GridSpec(200, 80, 8)
    a = square_mask(20, 20, 21, g.width, 0)
    b = square_mask(120, 20, 21, g.width, 1)
    fields = encode(Scene(g, None, [(a, Skeleton({})), (b, Skeleton({}))]))
    centers = detect_centers(fuse_all(fields)[KeypointType.PLY], radius=8.0)
    assert len(centers) == 2
    got = sorted((c.x, c.y) for c in centers)
    for (x, y), m in zip(got, (a, b)):
        cx, cy = m.centroid(g.width)
        assert math.hypot(x - cx, y - cy) <= 0.5


def test_group_exact_pointing():
    sem = np.zeros((30, 30))
    sem[10, 10] = 1.0
    off = np.zeros((30, 30, 2))
    off[10, 10] = (-2.0, -2.0)
    centers = [Keypoint(KeypointType.PLY, 8, 8), Keypoint(KeypointType.PLY, 20, 20)]
    masks, kept = group_instances(sem, off, centers)
    assert kept == [0] and masks[0].pixels.tolist() == [10 * 30 + 10]


def test_group_empty_foreground():
    centers = [Keypoint(KeypointType.PLY, 8, 8)]
    assert group_instances(np.full((5, 5), 0.49), np.zeros((5, 5, 2)), centers) == ([], [])


def test_group_encoded_scene(two_player_scene):
    g = two_player_scene.grid
    fields = encode(two_player_scene)
    centers = [Keypoint(KeypointType.PLY, *m.centroid(g.width)) for m in two_player_scene.masks]
    masks, kept = group_instances(fields.semantic, fields.offsets, centers)
    assert kept == [0, 1]
    for got, want in zip(masks, two_player_scene.masks):
        np.testing.assert_array_equal(got.pixels, want.pixels)


def test_assemble_thresholds_and_mask_restriction():
    g = GridSpec(40, 40, 8)
    maps = np.zeros((19,) + g.shape)
    mask = square_mask(0, 0, 10, g.width)
    maps[KeypointType.NOSE, 5, 5] = 0.09
    maps[KeypointType.LEFT_EAR, 30, 30] = 0.9  # outside the mask
    sk = assemble_skeletons(maps, [mask])
    assert sk[0].keypoints == {} and sk[0].confidence == 0.0


def test_assemble_encoded_single_player():
    scene = synth_scene(SynthConfig(seed=3, n_players=1, ball=False))
    fields = encode(scene)
    res = decode(fields)
    (skel,) = res.skeletons
    truth = scene.skeletons[0]
    assert set(skel.keypoints) == set(truth.keypoints)
    for k, kp in truth.keypoints.items():
        got = skel.keypoints[k]
        assert math.hypot(got.x - kp.x, got.y - kp.y) <= 0.5


def test_decode_zero_fieldset():
    res = decode(FieldSet.zeros(G))
    assert res.masks == () and res.skeletons == () and res.centers == ()
    assert (res.ball.x, res.ball.y, res.ball.confidence) == (0.0, 0.0, 0.0)


def test_decode_three_players_and_ball():
    scene = synth_scene(SynthConfig(seed=1, n_players=3, ball=True))
    res = decode(encode(scene))
    assert len(res.masks) == len(res.skeletons) == len(res.centers) == 3
    assert scene.ball_mask.contains(res.ball.x, res.ball.y, scene.grid.width)
    truth = {tuple(m.pixels): m for m in scene.masks}
    assert all(tuple(m.pixels) in truth for m in res.masks)


def test_decode_without_ply_fields():
    scene = synth_scene(SynthConfig(seed=2, n_players=2, ball=True))
    f = encode(scene)
    conf = np.array(f.conf)
    conf[KeypointType.PLY] = 0
    res = decode(f.replace(conf=conf))
    assert res.masks == () and res.skeletons == ()
    assert scene.ball_mask.contains(res.ball.x, res.ball.y, scene.grid.width)


def _noisy_fields(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(64, 64, 8)
    lo = (19,) + g.low_shape
    return FieldSet.from_linear(
        g,
        rng.random(g.shape),
        rng.normal(0, 6, g.shape + (2,)),
        rng.random(lo) * (rng.random(lo) < 0.2),
        rng.normal(0, 3, lo + (2,)),
        rng.uniform(1, 4, lo),
        np.ones(lo),
    )


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_decode_invariants_on_noise(seed):
    f = _noisy_fields(seed)
    cfg = DecodeConfig()
    res = decode(f, cfg)
    assert len(res.masks) == len(res.skeletons) == len(res.centers)
    w = f.grid.width
    # partition of the foreground
    allpx = np.concatenate([m.pixels for m in res.masks]) if res.masks else np.zeros(0, int)
    assert allpx.size == np.unique(allpx).size
    if res.masks:
        fg = np.flatnonzero(np.asarray(f.semantic).ravel() >= cfg.semantic_threshold)
        np.testing.assert_array_equal(np.sort(allpx), fg)
    for mask, skel in zip(res.masks, res.skeletons):
        for kp in skel.keypoints.values():
            assert mask.contains(kp.x, kp.y, w)
            assert 0 <= kp.confidence <= 1
    again = decode(f, cfg)
    assert again == res or repr(again) == repr(res)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 1), st.floats(0, 1))
def test_center_count_monotone_in_threshold(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    m = fuse_all(_noisy_fields(seed))[KeypointType.PLY]
    a = detect_centers(m, DecodeConfig(keypoint_threshold=lo))
    b = detect_centers(m, DecodeConfig(keypoint_threshold=hi))
    assert len(b) <= len(a)


def test_fuse_all_jobs_identical():
    f = _noisy_fields(7)
    a = fuse_all(f, DecodeConfig(jobs=1))
    b = fuse_all(f, DecodeConfig(jobs=4))
    assert a.tobytes() == b.tobytes()


def test_local_maxima_plateau():
    m = np.zeros((4, 4))
    m[1, 1] = m[1, 2] = 0.5
    assert local_maxima(m, 0.1).tolist() == [5, 6]


def test_config_validation():
    with pytest.raises(DomainError):
        DecodeConfig(keypoint_threshold=1.5)
    with pytest.raises(DomainError):
        DecodeConfig(nms_radius=0)
    with pytest.raises(DomainError):
        DecodeConfig(gaussian_truncation=0.5)
