'''
Unit tests for the harmonize module.
'''

# pylint: disable=import-error

import import_helper  # noqa
import synthetic

import numpy as np

from textsynth.errors import EmptyRegion, ShapeError
from textsynth.harmonize import EPS, masked_stats, rain, rain_foreground, harmonize_text


def test_masked_stats():

    # Test 1: constant map
    s = masked_stats(np.full((4, 4, 3), 0.3), np.ones((4, 4)))
    assert np.allclose(s.mean, 0.3)
    assert np.allclose(s.std, np.sqrt(EPS))

    # Test 2: two points
    s = masked_stats(np.array([[0.0, 2.0]]), np.ones((1, 2)))
    assert np.allclose(s.mean, 1.0)
    assert np.allclose(s.std, np.sqrt(1 + EPS))

    # Test 3: weighted moments, computed in two passes
    rng = np.random.default_rng(0)
    f = rng.random((8, 8, 3))
    m = rng.random((8, 8))
    s = masked_stats(f, m)
    for c in range(3):
        mu = np.sum(f[..., c] * m) / np.sum(m)
        var = np.sum(m * (f[..., c] - mu) ** 2) / np.sum(m)
        assert abs(s.mean[c] - mu) <= 1e-6
        assert abs(s.std[c] - np.sqrt(var + EPS)) <= 1e-6

    # Test 4: invalid inputs
    try:
        masked_stats(f, np.zeros((8, 8)))
        assert False
    except EmptyRegion:
        assert True
    try:
        masked_stats(f, np.ones((4, 4)))
        assert False
    except ShapeError:
        assert True


def _half_mask(shape=(8, 8)):
    m = np.zeros(shape)
    m[:, :shape[1] // 2] = 1.0
    return m


def test_rain():

    rng = np.random.default_rng(1)
    m = _half_mask()

    # Test 1: statistics already equal, nothing moves
    half = rng.random((8, 4, 3))
    f = np.concatenate([half, half], axis=1)
    assert np.allclose(rain(f, m)[:, :4], f[:, :4], atol=1e-6)

    # Test 2: uniform foreground goes to the background mean
    f = rng.random((8, 8, 3))
    f[:, :4] = 0.9
    bg = masked_stats(f, 1 - m)
    assert np.allclose(rain(f, m)[:, :4], bg.mean, atol=1e-9)

    # Test 3: foreground takes the background statistics
    f = rng.random((8, 8, 3)) * np.array([1.0, 0.5, 0.2])
    out = rain(f, m)
    fg_after = masked_stats(out, m)
    bg_before = masked_stats(f, 1 - m)
    assert np.allclose(fg_after.mean, bg_before.mean, atol=1e-3)
    assert np.allclose(fg_after.std, bg_before.std, atol=1e-3)

    # Test 4: the formula from independently computed statistics
    fg = masked_stats(f, m)
    expected = bg_before.std * (f - fg.mean) / fg.std + bg_before.mean
    assert np.allclose(out, expected)

    # Test 5: 2-D in, 2-D out
    assert rain(f[..., 0], m).shape == (8, 8)

    # Test 6: nothing left for the background
    try:
        rain(f, np.ones((8, 8)))
        assert False
    except EmptyRegion:
        assert True


def test_rain_idempotent_on_foreground():

    rng = np.random.default_rng(2)
    f = rng.random((10, 10, 3))
    m = _half_mask((10, 10))
    once = rain_foreground(f, m)
    twice = rain_foreground(once, m)
    assert np.allclose(once[:, :5], twice[:, :5], atol=1e-4)
    # background kept
    assert np.array_equal(once[:, 5:], f[:, 5:])


def _text_scene(dtype=np.float64):
    rng = np.random.default_rng(4)
    img = 0.3 + 0.4 * rng.random((40, 40, 3))
    mask = np.zeros((40, 40))
    mask[10:30, 10:30] = 1.0
    img[mask > 0] = (0.1, 0.2, 0.9)
    img[12:28:2, 10:30] = (0.2, 0.1, 0.7)
    if dtype == np.uint8:
        img = np.rint(img * 255).astype(np.uint8)
    return img, mask


def test_harmonize_text():

    # Test 1: zero strength
    comp, mask = _text_scene(np.uint8)
    assert np.array_equal(harmonize_text(comp, mask, alpha=0.0), comp)

    # Test 2: pixels outside the mask are untouched, bitwise
    out = harmonize_text(comp, mask)
    assert out.dtype == np.uint8
    assert np.array_equal(out[mask == 0], comp[mask == 0])
    assert not np.array_equal(out[mask > 0], comp[mask > 0])

    # Test 3: one level at full strength matches the local background
    comp, mask = _text_scene()
    out = harmonize_text(comp, mask, levels=1, alpha=1.0)
    fg = masked_stats(out, mask)
    bg = masked_stats(comp, 1 - mask)
    assert np.allclose(fg.mean, bg.mean, atol=1e-2)
    assert np.allclose(fg.std, bg.std, atol=1e-2)

    # Test 4: three levels still pull the colour towards the background
    out = harmonize_text(comp, mask, levels=3, alpha=1.0)
    before = np.abs(masked_stats(comp, mask).mean - bg.mean).sum()
    after = np.abs(masked_stats(out, mask).mean - bg.mean).sum()
    assert after < before


def test_harmonize_text_soft_mask():

    comp = synthetic.textured_background((40, 40))
    mask = np.zeros((40, 40))
    mask[15:25, 12:28] = 0.5
    mask[18:22, 12:28] = 1.0
    out = harmonize_text(comp, mask, alpha=0.8)
    assert np.array_equal(out[mask == 0], comp[mask == 0])


def test_harmonize_text_invalid_inputs():

    comp, mask = _text_scene()
    for kwargs in ({'alpha': 1.5}, {'levels': 0}):
        try:
            harmonize_text(comp, mask, **kwargs)
            assert False
        except ValueError:
            assert True

    bad_masks = [np.zeros((40, 40)), np.ones((40, 40)), np.ones((10, 10))]
    for m in bad_masks:
        try:
            harmonize_text(comp, m)
            assert False
        except (EmptyRegion, ShapeError):
            assert True
