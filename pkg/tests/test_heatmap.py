"""Importance-weighted heatmap composition and rendering."""

import numpy as np
import pytest

from aismap.errors import DegenerateMap, IoError, NoPositiveAis, ShapeError
from aismap.heatmap import (Heatmap, ais_weights, bilinear_upsample, colorize,
                            compose, match_score, max_entropy,
                            normalize_underlay, render)
from aismap.tensorio import read_tensor


# ---------------------------------------------------------------------------
# weight normalization


def test_ais_weights_zeroes_negatives_and_normalizes():
    w = ais_weights(np.array([0.2, -0.1, 0.2]))
    assert np.array_equal(w, [0.5, 0.0, 0.5])


def test_ais_weights_single_positive_is_one_hot():
    w = ais_weights(np.array([-0.3, 0.0, 0.7, -0.1]))
    assert np.array_equal(w, [0.0, 0.0, 1.0, 0.0])


def test_ais_weights_all_nonpositive_raises():
    with pytest.raises(NoPositiveAis):
        ais_weights(np.array([-0.2, 0.0, -0.5]))


def test_ais_weights_empty_row_rejected():
    with pytest.raises(ShapeError):
        ais_weights(np.array([]))


def test_ais_weights_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        row = rng.normal(size=16)
        if np.all(row <= 0):
            continue
        w = ais_weights(row)
        assert np.isclose(w.sum(), 1.0, atol=1e-12)
        assert np.all(w >= 0)


def test_ais_weights_power_of_two_scaling_is_bitwise_invariant():
    rng = np.random.default_rng(1)
    row = rng.normal(size=12)
    base = ais_weights(row)
    for scale in (2.0, 0.25, 1024.0):
        assert np.array_equal(ais_weights(row * scale), base)


def test_ais_weights_arbitrary_positive_scaling_invariant():
    rng = np.random.default_rng(2)
    row = rng.normal(size=12)
    base = ais_weights(row)
    for scale in (3.7, 0.013, 295.11):
        assert np.allclose(ais_weights(row * scale), base, atol=1e-12)


# ---------------------------------------------------------------------------
# bilinear upsampling


def test_bilinear_identity_when_sizes_match():
    rng = np.random.default_rng(3)
    ch = rng.normal(size=(5, 5))
    assert np.array_equal(bilinear_upsample(ch, 5), ch)


def test_bilinear_constant_channel_stays_constant():
    ch = np.full((3, 3), 0.7)
    out = bilinear_upsample(ch, 11)
    assert np.array_equal(out, np.full((11, 11), 0.7))


def test_bilinear_2x2_to_4x4_hand_oracle():
    # Half-pixel centers map output column c to source coordinate
    # (c + 0.5)/2 - 0.5 = [-0.25, 0.25, 0.75, 1.25], edge-clamped, giving
    # interpolation weights [0, 0.25, 0.75, 1] between the two source cells.
    ch = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = bilinear_upsample(ch, 4)
    f = np.array([0.0, 0.25, 0.75, 1.0])
    expect = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            top = (1 - f[j]) * 0.0 + f[j] * 1.0
            bottom = (1 - f[j]) * 1.0 + f[j] * 0.0
            expect[i, j] = (1 - f[i]) * top + f[i] * bottom
    assert np.allclose(out, expect, atol=1e-15)
    # spot values from the closed form
    assert out[0, 0] == 0.0 and out[0, 3] == 1.0
    assert out[3, 0] == 1.0 and out[3, 3] == 0.0
    assert np.isclose(out[1, 1], 0.375)
    assert np.isclose(out[2, 2], 0.375)


def test_bilinear_preserves_value_range():
    rng = np.random.default_rng(4)
    ch = rng.normal(size=(4, 4))
    out = bilinear_upsample(ch, 13)
    assert out.min() >= ch.min() - 1e-12
    assert out.max() <= ch.max() + 1e-12


def test_bilinear_requires_2d():
    with pytest.raises(ShapeError):
        bilinear_upsample(np.zeros((2, 2, 2)), 4)
    with pytest.raises(ValueError):
        bilinear_upsample(np.zeros((2, 2)), 0)


# ---------------------------------------------------------------------------
# composition


def test_compose_one_hot_equals_upsampled_channel():
    rng = np.random.default_rng(5)
    acts_t = rng.normal(size=(3, 4, 4))
    w = np.array([0.0, 1.0, 0.0])
    hm = compose(acts_t, w, out_size=8, image_id="x")
    assert np.array_equal(hm.values, bilinear_upsample(acts_t[1], 8))
    assert hm.image_id == "x"
    assert np.array_equal(hm.weights_used, w)


def test_compose_uniform_weights_of_identical_channels():
    ch = np.random.default_rng(6).normal(size=(4, 4))
    acts_t = np.stack([ch, ch, ch])
    hm = compose(acts_t, np.full(3, 1 / 3), out_size=9)
    assert np.allclose(hm.values, bilinear_upsample(ch, 9), atol=1e-12)


def test_compose_convex_bound_is_exact():
    rng = np.random.default_rng(7)
    acts_t = rng.normal(size=(6, 5, 5))
    w = ais_weights(rng.normal(size=6))
    hm = compose(acts_t, w, out_size=17)
    used = [bilinear_upsample(acts_t[k], 17) for k in range(6) if w[k] > 0]
    lower = np.minimum.reduce(used)
    upper = np.maximum.reduce(used)
    assert np.all(hm.values >= lower)
    assert np.all(hm.values <= upper)


def test_compose_matches_direct_weighted_sum():
    rng = np.random.default_rng(8)
    acts_t = rng.normal(size=(4, 3, 3))
    w = ais_weights(np.abs(rng.normal(size=4)))
    hm = compose(acts_t, w, out_size=7)
    direct = sum(w[k] * bilinear_upsample(acts_t[k], 7) for k in range(4))
    assert np.allclose(hm.values, direct, atol=1e-12)


def test_compose_shape_mismatch():
    with pytest.raises(ShapeError):
        compose(np.zeros((3, 4, 4)), np.ones(2) / 2, out_size=8)


# ---------------------------------------------------------------------------
# comparison scores


def test_match_score_identical_maps():
    hm = Heatmap(values=np.random.default_rng(9).normal(size=(6, 6)),
                 weights_used=np.ones(1))
    r = match_score(hm, hm)
    assert np.isclose(r.value, 1.0, atol=1e-12)
    assert not r.degenerate


def test_match_score_inverted_map():
    a = np.random.default_rng(10).random(size=(5, 5))
    r = match_score(a, 1.0 - a)
    assert np.isclose(r.value, -1.0, atol=1e-12)


def test_match_score_constant_map_flagged():
    a = np.random.default_rng(11).random(size=(4, 4))
    r = match_score(np.full((4, 4), 0.3), a)
    assert r == (0.0, True)


def test_match_score_dim_mismatch():
    with pytest.raises(ShapeError):
        match_score(np.zeros((3, 3)), np.zeros((4, 4)))


def test_max_entropy_one_hot_pair_is_zero():
    one_hot = np.zeros(10)
    one_hot[3] = 1.0
    assert max_entropy(one_hot, one_hot) == 0.0


def test_max_entropy_one_hot_vs_uniform_four():
    one_hot = np.array([1.0, 0.0, 0.0, 0.0])
    uniform = np.full(4, 0.25)
    assert np.isclose(max_entropy(one_hot, uniform), np.log(4), atol=1e-12)


def test_max_entropy_is_symmetric():
    rng = np.random.default_rng(12)
    a = rng.random(8)
    a /= a.sum()
    b = rng.random(8)
    b /= b.sum()
    assert max_entropy(a, b) == max_entropy(b, a)


# ---------------------------------------------------------------------------
# rendering


def test_render_writes_png_and_exact_sidecar(tmp_path):
    rng = np.random.default_rng(13)
    hm = Heatmap(values=rng.normal(size=(12, 12)), weights_used=np.ones(2) / 2,
                 image_id="img0")
    out = tmp_path / "map.png"
    render(hm, out)
    assert out.exists()
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    back = read_tensor(tmp_path / "map.npy")
    assert np.array_equal(back, hm.values)


def test_render_is_byte_stable(tmp_path):
    rng = np.random.default_rng(14)
    hm = Heatmap(values=rng.normal(size=(10, 10)), weights_used=np.ones(1))
    render(hm, tmp_path / "a.png")
    render(hm, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_render_with_underlay(tmp_path):
    rng = np.random.default_rng(15)
    hm = Heatmap(values=rng.normal(size=(8, 8)), weights_used=np.ones(1))
    underlay = rng.random(size=(8, 8, 3))
    render(hm, tmp_path / "u.png", underlay=underlay)
    assert (tmp_path / "u.png").exists()


def test_render_underlay_shape_mismatch(tmp_path):
    hm = Heatmap(values=np.zeros((8, 8)), weights_used=np.ones(1))
    with pytest.raises(ShapeError):
        render(hm, tmp_path / "u.png", underlay=np.zeros((4, 4, 3)))


def test_render_unwritable_path_raises_io_error(tmp_path):
    hm = Heatmap(values=np.zeros((4, 4)), weights_used=np.ones(1))
    with pytest.raises(IoError):
        render(hm, tmp_path / "no" / "such" / "dir" / "x.png")


def test_colorize_constant_map_uses_midpoint():
    rgb = colorize(np.full((5, 5), 2.0))
    assert rgb.shape == (5, 5, 3)
    assert np.allclose(rgb, rgb[0, 0])  # uniform image
    mid = colorize(np.array([[0.0, 0.5, 1.0]]))[0, 1]
    assert np.allclose(rgb[0, 0], mid, atol=1e-12)


def test_colorize_unknown_map_rejected():
    with pytest.raises(KeyError):
        colorize(np.zeros((2, 2)), colormap="not-a-colormap")


def test_normalize_underlay_channel_orders_and_ranges():
    rng = np.random.default_rng(16)
    hwc = rng.random(size=(6, 6, 3))
    assert np.allclose(normalize_underlay(hwc), hwc)
    chw = np.moveaxis(hwc, -1, 0)
    assert np.allclose(normalize_underlay(chw), hwc)
    eight_bit = (hwc * 255).round()
    assert np.allclose(normalize_underlay(eight_bit), eight_bit / 255)
    with pytest.raises(ShapeError):
        normalize_underlay(rng.random(size=(6, 6)))
