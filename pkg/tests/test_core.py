'''
Unit tests for the core module.
'''

# pylint: disable=import-error

import import_helper  # noqa
import synthetic

import numpy as np
import pytest

from textsynth.core import (QuadBox, StrokeMask, Heatmap, Homography, TextPatch, SceneInstance, SceneRecord,
                            SynthRecord, validate_scene_record, inconsistent_scene_records, PATCH_SIZE)
from textsynth.errors import ShapeError, SingularTransform


def test_create_quadbox():

    q = QuadBox.from_bounds(10, 20, 30, 25)

    assert q.points.shape == (4, 2)
    assert q.centroid == (20.0, 22.5)
    assert q.width == 20.0
    assert q.height == 5.0
    assert q.area == 100.0
    assert q.bounds == (10, 20, 30, 25)
    assert q.to_list() == [10.0, 20.0, 30.0, 20.0, 30.0, 25.0, 10.0, 25.0]
    assert q.violations() == []
    assert not q.is_degenerate()

    # immutable
    with pytest.raises(ValueError):
        q.points[0, 0] = 5

    # equality and hashing by value
    assert q == QuadBox(q.to_list())
    assert len({q, QuadBox(q.to_list())}) == 1

    # wrong number of points
    try:
        QuadBox([(0, 0), (1, 1)])
        assert False
    except ShapeError:
        assert True


def test_quadbox_violations():

    # Test 1: counter-clockwise corners have negative area
    q = QuadBox([(0, 0), (0, 10), (10, 10), (10, 0)])
    assert 'non-positive area' in q.violations()

    # Test 2: bow-tie
    q = QuadBox([(0, 0), (10, 10), (10, 0), (0, 10)])
    assert 'self-intersecting polygon' in q.violations()

    # Test 3: non-finite
    q = QuadBox([(0, 0), (np.nan, 0), (1, 1), (0, 1)])
    assert q.violations() == ['non-finite coordinate']
    assert q.is_degenerate()

    # Test 4: collinear corners
    assert QuadBox([(0, 0), (5, 0), (10, 0), (0, 10)]).is_degenerate()


def test_quadbox_within():

    q = QuadBox.square(5, 5, 4)
    assert q.within((20, 20))
    assert not q.within((6, 6))


def test_stroke_mask_and_heatmap():

    m = StrokeMask(np.eye(4), instance_id=3)
    assert m.area == 4
    assert m.instance_id == 3
    assert m.bitmap.dtype == bool
    assert not m.is_empty()
    assert StrokeMask(np.zeros((2, 2))).is_empty()

    try:
        StrokeMask(np.zeros(4))
        assert False
    except ShapeError:
        assert True

    h = Heatmap([[0.0, 0.5], [1.0, 0.0]])
    assert h.support().sum() == 2
    assert not h.is_binary()
    assert h.violations() == []
    assert Heatmap([[0.0, 1.0]]).is_binary()
    assert Heatmap([[0.0, 1.5]]).violations() == ['value outside [0, 1]']
    assert Heatmap([[0.0, np.inf]]).violations(normalized=False) == []
    assert Heatmap([[0.0, np.inf]]).violations() == ['non-finite value']


def test_homography():

    # Test 1: normalisation and composition
    h = Homography(2 * np.array([[1, 0, 3], [0, 1, 4], [0, 0, 1]]))
    assert h.matrix[2, 2] == 1.0
    assert np.allclose(h.apply([(0, 0), (1, 1)]), [(3, 4), (4, 5)])
    assert (h @ h.inverse()).allclose(Homography.identity())
    assert (Homography.translation(3, 4) @ Homography.scaling(2)).allclose(Homography.scaling(2, 2, 3, 4))
    assert len(h.free_params()) == 8

    # Test 2: quads map to quads
    q = Homography.scaling(2).apply_quad(QuadBox.from_bounds(0, 0, 1, 1))
    assert q == QuadBox.from_bounds(0, 0, 2, 2)

    # Test 3: singular matrices
    for m in (np.zeros((3, 3)), [[1, 0, 0], [2, 0, 0], [0, 0, 1]]):
        try:
            Homography(m)
            assert False
        except SingularTransform:
            assert True

    # Test 4: wrong shape
    try:
        Homography(np.eye(2))
        assert False
    except ShapeError:
        assert True


def test_text_patch():

    size = (PATCH_SIZE, PATCH_SIZE)
    alpha = np.zeros(size)
    alpha[100:120, 50:200] = 1.0
    bbox = np.zeros(size, dtype=bool)
    bbox[98:122, 48:202] = True

    p = TextPatch(np.zeros(size + (3,)), alpha, bbox, 'hello')
    assert p.rgb.dtype == np.uint8
    assert p.rect is None
    assert p.bbox() == (47.5, 97.5, 201.5, 121.5)
    rect = QuadBox.square(50, 50, 40)
    assert p.with_rect(rect).rect == rect
    assert p.with_rect(rect).text == 'hello'

    # Test 2: alpha outside the bbox mask
    try:
        TextPatch(np.zeros(size + (3,)), alpha, np.zeros(size, dtype=bool), 'hello')
        assert False
    except ValueError:
        assert True

    # Test 3: wrong size
    try:
        TextPatch(np.zeros((8, 8, 3)), np.zeros((8, 8)), np.zeros((8, 8)), 'x')
        assert False
    except ShapeError:
        assert True

    assert TextPatch(np.zeros(size + (3,)), np.zeros(size), np.zeros(size), '').bbox() is None


def test_scene_record():

    rec = synthetic.scene_record(valid=[True, False])
    assert rec.shape == (96, 128)
    assert rec.valid_indices() == [0]
    assert rec.record_id == 'ic15_1'
    assert 'valid:         1' in repr(rec)


def test_synth_record():

    image = np.zeros((10, 10, 3), dtype=np.uint8)
    rec = SynthRecord(image, [], seed=5, provenance={'background': 'bg'})
    assert rec.empty
    assert rec.seed == 5
    assert not rec.image.flags.writeable


def test_validate_scene_record():

    # Test 1: well formed
    rec = synthetic.scene_record()
    assert validate_scene_record(rec) == []
    assert inconsistent_scene_records([rec]) == []

    # Test 2: dimension mismatch between original and erased
    bad = SceneRecord(rec.original, rec.erased[:50], rec.instances, record_id='bad')
    fields = [v.field for v in validate_scene_record(bad)]
    assert 'erased' in fields

    # Test 3: empty mask on a valid instance, stroke pixels outside the quad
    inst = rec.instances[0]
    empty = SceneInstance(inst.quad, StrokeMask(np.zeros(rec.shape), 0), True)
    stray_bitmap = inst.mask.bitmap.copy()
    stray_bitmap[90, 120] = True
    stray = SceneInstance(inst.quad, StrokeMask(stray_bitmap, 1), True)
    bad = SceneRecord(rec.original, rec.erased, [empty, stray], record_id='bad')
    violations = validate_scene_record(bad)
    assert [(v.field, v.instance) for v in violations] == [('mask', 0), ('mask', 1)]
    assert '1 stroke pixels outside the quad' in str(violations[1])

    # Test 4: an empty mask on an invalid instance is fine
    ok = SceneRecord(rec.original, rec.erased, [SceneInstance(inst.quad, empty.mask, False)])
    assert validate_scene_record(ok) == []

    pairs = inconsistent_scene_records([rec, bad])
    assert len(pairs) == 1 and pairs[0][0] is bad
