'''
Unit tests for the pipeline module.
'''

# pylint: disable=import-error

import import_helper  # noqa
import synthetic

import warnings

import numpy as np
import pytest

from textsynth.core import PATCH_SIZE, Heatmap, QuadBox, TextPatch
from textsynth.datio import save_heatmap
from textsynth.errors import ConfigError, EmptySynthesis, PlacementRejected
from textsynth.geometry import rect_similarity
from textsynth.pipeline import (FALLBACK_ANGLE_DEG, RANDOM_ANGLE_DEG, Backends, ColorBackend, GeometryBackend,
                                LocationBackend, PipelineConfig, crosses_boundary, dominant_angle, fit_geometry,
                                geometry_transform, line_orientations, locate, place_instance, rect_coverage,
                                resize_long_side, sample_rect, synthesize)
from textsynth.textrender import Assets, FontStore

PLAIN = Backends(location=LocationBackend.UNIFORM, geometry=GeometryBackend.IDENTITY,
                 color=ColorBackend.PASSTHROUGH)


def _patch(fill=(255, 0, 0), ink=True):
    '''A bar of solid ink in the middle band of a patch'''
    rgb = np.zeros((PATCH_SIZE, PATCH_SIZE, 3), dtype=np.uint8)
    alpha = np.zeros((PATCH_SIZE, PATCH_SIZE))
    if ink:
        rgb[100:140, 40:216] = fill
        alpha[100:140, 40:216] = 1.0
    return TextPatch(rgb, alpha, alpha > 0, 'bar')


def _stripes(angle_deg, shape=(128, 128), period=6.0):
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    t = np.tan(np.radians(angle_deg))
    wave = 128 + 100 * np.sin(2 * np.pi * (ys - xs * t) / period)
    return np.repeat(wave[..., None], 3, axis=2).astype(np.uint8)


def _edge_angle(h, size=PATCH_SIZE):
    p = h.apply_quad(QuadBox.from_bounds(0, 0, size, size)).points
    d = p[1] - p[0]
    return np.degrees(np.arctan2(d[1], d[0]))


def _assets():
    return Assets(FontStore([synthetic.FONT_PATH]), ('text', 'scene', 'synth', 'word'))


def test_backends():

    assert PLAIN.names() == {'location': 'uniform', 'geometry': 'identity', 'color': 'passthrough'}

    # Test 1: heatmap-file location needs a directory
    try:
        Backends(location=LocationBackend.HEATMAP_FILE)
        assert False
    except ConfigError:
        assert True


def test_pipeline_config():

    assert PipelineConfig().to_dict()['texts_per_image'] == [1, 8]
    for bad in ({'texts_per_image': (3, 1)}, {'overlap_required': 0.0}, {'image_size': 8},
                {'harmonize_alpha': 1.5}):
        with pytest.raises(ConfigError):
            PipelineConfig(**bad)


def test_sample_rect():

    config = PipelineConfig(max_attempts=1)
    rng = np.random.default_rng(0)

    # Test 1: a full proposal accepts the first square
    full = Heatmap(np.ones((128, 160)))
    for _ in range(20):
        rect = sample_rect(full, rng, config)
        assert rect is not None
        x0, y0, x1, y1 = rect.bounds
        assert np.isclose(x1 - x0, y1 - y0)
        assert x0 >= -0.5 and y0 >= -0.5 and x1 <= 159.5 and y1 <= 127.5
        assert x1 - x0 >= round(config.min_text_height_px * 1.4) - 1e-9

    # Test 2: empty proposal
    assert sample_rect(Heatmap(np.zeros((64, 64))), rng, config) is None

    # Test 3: accepted rects honour the overlap requirement
    values = np.zeros((128, 128))
    values[20:90, 30:110] = 1.0
    proposal = Heatmap(values)
    config = PipelineConfig(max_attempts=50)
    found = 0
    for _ in range(50):
        rect = sample_rect(proposal, rng, config)
        if rect is not None:
            found += 1
            assert rect_coverage(rect, proposal) >= config.overlap_required
    assert found > 0

    # Test 4: squares larger than the image are never drawn
    assert sample_rect(Heatmap(np.ones((16, 16))), rng, PipelineConfig(image_size=16, max_attempts=5)) is None


def test_line_orientations():

    # Test 1: horizontal stripes are lines at 0 degrees
    angle, weight = line_orientations(_stripes(0.0)[..., 0].astype(np.float64))
    assert abs(dominant_angle(angle, weight)) <= 1e-9

    # Test 2: tilted stripes
    angle, weight = line_orientations(_stripes(10.0)[..., 0].astype(np.float64))
    assert abs(dominant_angle(angle, weight) - 10.0) <= 1.5

    # Test 3: no gradient, no direction
    angle, weight = line_orientations(np.full((32, 32), 0.5))
    assert dominant_angle(angle, weight) is None


def test_fit_geometry():

    rect = QuadBox.from_bounds(31.5, 31.5, 95.5, 95.5)

    # Test 1: horizontal leading lines keep the text level
    h = fit_geometry(rect, _stripes(0.0), None, np.random.default_rng(0))
    assert abs(_edge_angle(h)) <= 1.0
    assert abs(np.linalg.det(h.matrix)) > 1e-9

    # Test 2: tilted leading lines tilt the baseline
    h = fit_geometry(rect, _stripes(10.0), None, np.random.default_rng(0))
    assert abs(_edge_angle(h) - 10.0) <= 2.0

    # Test 3: plain background falls back to a reproducible mild perspective
    plain = np.full((128, 128, 3), 120, dtype=np.uint8)
    h1 = fit_geometry(rect, plain, None, np.random.default_rng(5))
    h2 = fit_geometry(rect, plain, None, np.random.default_rng(5))
    assert h1.allclose(h2)
    assert np.all(np.abs(_corner_angles(h1)) <= FALLBACK_ANGLE_DEG + 1e-6)


def _corner_angles(h):
    src = QuadBox.from_bounds(0, 0, PATCH_SIZE, PATCH_SIZE).points
    dst = h.apply_quad(QuadBox.from_bounds(0, 0, PATCH_SIZE, PATCH_SIZE)).points
    c = np.array([PATCH_SIZE / 2.0, PATCH_SIZE / 2.0])
    a = np.degrees(np.arctan2(dst[:, 1] - c[1], dst[:, 0] - c[0]) - np.arctan2(src[:, 1] - c[1], src[:, 0] - c[0]))
    return (a + 180.0) % 360.0 - 180.0


def test_geometry_transform():

    rect = QuadBox.from_bounds(31.5, 31.5, 95.5, 95.5)
    bg = _stripes(10.0)

    # Test 1: identity backend
    h = geometry_transform(PLAIN, rect, bg, None, np.random.default_rng(0))
    assert np.allclose(h.matrix, np.eye(3))

    # Test 2: random backend, bounded and reproducible
    backends = Backends(location=LocationBackend.UNIFORM, geometry=GeometryBackend.RANDOM)
    angles = []
    for seed in range(20):
        h = geometry_transform(backends, rect, bg, None, np.random.default_rng(seed))
        assert h.allclose(geometry_transform(backends, rect, bg, None, np.random.default_rng(seed)))
        angles.append(_corner_angles(h))
    angles = np.array(angles)
    assert np.all(np.abs(angles) <= RANDOM_ANGLE_DEG + 1e-6)
    assert np.abs(angles).max() > FALLBACK_ANGLE_DEG

    # Test 3: rule-based backend follows the background
    backends = Backends(location=LocationBackend.UNIFORM)
    h = geometry_transform(backends, rect, bg, None, np.random.default_rng(0))
    assert abs(_edge_angle(h) - 10.0) <= 2.0


def test_place_instance():

    bg = synthetic.textured_background((128, 128))
    rect = QuadBox.from_bounds(31.5, 31.5, 95.5, 95.5)
    patch = _patch()

    # Test 1: identity geometry and no harmonisation leave the rest of the image untouched
    comp, alpha, quad = place_instance(bg, patch, rect, PLAIN, np.random.default_rng(0))
    assert comp.dtype == np.uint8 and comp.shape == bg.shape
    assert np.array_equal(comp[alpha == 0], bg[alpha == 0])
    expected = rect_similarity(rect).apply_quad(QuadBox.from_bounds(*patch.bbox()))
    assert np.allclose(quad.points, expected.points)
    solid = alpha > 0.99
    assert solid.any()
    assert np.all(np.abs(comp[solid].astype(int) - (255, 0, 0)) <= 3)

    # Test 2: harmonisation pulls the text colour towards the background
    rain = Backends(location=LocationBackend.UNIFORM, geometry=GeometryBackend.IDENTITY, color=ColorBackend.RAIN)
    config = PipelineConfig(harmonize_alpha=1.0, harmonize_levels=1)
    harmonised, alpha2, _ = place_instance(bg, patch, rect, rain, np.random.default_rng(0), config=config)
    assert np.array_equal(alpha, alpha2)
    target = bg.reshape(-1, 3).mean(axis=0)
    before = np.linalg.norm(comp[solid].mean(axis=0) - target)
    after = np.linalg.norm(harmonised[solid].astype(np.float64).mean(axis=0) - target)
    assert after < before

    # Test 3: placements leaving the image are rejected
    try:
        place_instance(bg, patch, QuadBox.from_bounds(99.5, 99.5, 163.5, 163.5), PLAIN, np.random.default_rng(0))
        assert False
    except PlacementRejected:
        assert True

    # Test 4: so are patches without ink
    try:
        place_instance(bg, _patch(ink=False), rect, PLAIN, np.random.default_rng(0))
        assert False
    except PlacementRejected:
        assert True


def test_resize_long_side():

    img = np.zeros((50, 100, 3), dtype=np.uint8)
    assert resize_long_side(img, 200).shape == (100, 200, 3)
    assert resize_long_side(img, 50).shape == (25, 50, 3)
    same = resize_long_side(img, 100)
    assert same.shape == img.shape and same is not img


def test_locate(tmp_path):

    bg = synthetic.textured_background((64, 96))

    # Test 1: uniform proposal
    hm = locate(bg, PLAIN, PipelineConfig())
    assert hm.shape == (64, 96) and np.all(hm.values == 1.0)

    # Test 2: precomputed heatmap, resized to the background
    values = np.zeros((32, 48))
    values[8:24, 12:36] = 1.0
    save_heatmap(tmp_path / 'bg_1.png', Heatmap(values))
    backends = Backends(location=LocationBackend.HEATMAP_FILE, heatmap_dir=str(tmp_path))
    hm = locate(bg, backends, PipelineConfig(), 'bg_1')
    assert hm.shape == (64, 96)
    assert hm.values[32, 48] == 1.0 and hm.values[2, 2] == 0.0
    assert set(np.unique(hm.values)) <= {0.0, 1.0}


def test_crosses_boundary():

    semantic = np.zeros((40, 40), dtype=np.int32)
    semantic[:, 20:] = 1
    assert not crosses_boundary(QuadBox.from_bounds(2, 2, 15, 15), semantic)
    assert crosses_boundary(QuadBox.from_bounds(10, 2, 30, 15), semantic)


def test_synthesize():

    bg = synthetic.textured_background((96, 128))
    assets = _assets()
    config = PipelineConfig(image_size=256, texts_per_image=(3, 5), seed=3)

    # Test 1: placed instances are disjoint, large enough and carry ink
    rec = synthesize(bg, config, PLAIN, assets, record_id='bg_7')
    assert rec.image.shape == (192, 256, 3)
    assert rec.provenance['backends'] == PLAIN.names()
    assert rec.provenance['source_size'] == [96, 128]
    footprints = [inst.quad.mask(rec.image.shape) for inst in rec.instances]
    for i, a in enumerate(footprints):
        for b in footprints[i + 1:]:
            assert not (a & b).any()
    for inst in rec.instances:
        assert inst.quad.height >= config.min_text_height_px
        assert inst.quad.within(rec.image.shape)
        assert inst.mask.bitmap.any()
        assert inst.text in assets.lexicon

    # Test 2: same seed and background, same sample
    again = synthesize(bg, config, PLAIN, assets, record_id='bg_7')
    assert np.array_equal(rec.image, again.image)
    assert [i.text for i in rec.instances] == [i.text for i in again.instances]

    # Test 3: no texts requested, background returned resized and nothing warned
    with warnings.catch_warnings():
        warnings.simplefilter('error', EmptySynthesis)
        empty = synthesize(bg, PipelineConfig(image_size=128, texts_per_image=(0, 0)), PLAIN, assets, 'bg_7')
    assert empty.empty and not empty.instances
    assert np.array_equal(empty.image, bg)

    # Test 4: nothing fits, the sample is flagged empty with a warning
    with pytest.warns(EmptySynthesis):
        tiny = synthesize(bg, PipelineConfig(image_size=16, texts_per_image=(1, 1), max_attempts=3), PLAIN,
                          assets, 'bg_7')
    assert tiny.empty and tiny.image.shape[1] == 16
