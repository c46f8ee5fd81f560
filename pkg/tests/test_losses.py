'''
Unit tests for the losses module.
'''

# pylint: disable=import-error

import import_helper  # noqa

import numpy as np
from hypothesis import given, settings, strategies as st

from textsynth.core import Homography
from textsynth.errors import ShapeError
from textsynth.losses import (LossWeights, bce, dice, dice_grad, tlpnet_loss, smooth_l1, smooth_l1_grad,
                              homography_l1, region_loss, hinge_d, gtm_gen_loss, chm_gen_loss)

H = 1e-5


def test_loss_weights():

    w = LossWeights()
    assert (w.lambda0, w.lambda1, w.lambda2, w.lambda3) == (10.0, 50.0, 10.0, 5.0)
    try:
        LossWeights(lambda2=-1)
        assert False
    except ValueError:
        assert True


def test_bce():

    ones = np.ones((3, 3))
    assert bce(ones, ones) < 1e-6
    assert np.isclose(bce(np.full(5, 0.5), np.array([0, 1, 0, 1, 1])), np.log(2))

    rng = np.random.default_rng(0)
    s, t = rng.uniform(0.01, 0.99, 20), rng.random(20)
    expected = sum(-(ti * np.log(si) + (1 - ti) * np.log(1 - si)) for si, ti in zip(s, t)) / 20
    assert abs(bce(s, t) - expected) <= 1e-6

    try:
        bce(np.ones(3), np.ones(4))
        assert False
    except ShapeError:
        assert True


def test_dice():

    t = np.array([0, 1, 1, 0, 1], dtype=float)
    assert dice(t, t) == 0.0
    assert dice(1 - t, t) == 1.0
    assert dice(np.zeros(4), np.zeros(4)) == 0.0
    assert not dice_grad(np.zeros(4), np.zeros(4)).any()

    rng = np.random.default_rng(1)
    s = rng.random(10)
    assert np.isclose(dice(s, t.repeat(2)), dice(t.repeat(2), s))
    assert 0 <= dice(s, t.repeat(2)) <= 1


unit_vectors = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=12)


@settings(max_examples=100, deadline=None)
@given(unit_vectors, st.data())
def test_dice_grad_matches_finite_differences(s, data):

    s = np.array(s)
    t = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(s), max_size=len(s))))
    grad = dice_grad(s, t)
    numeric = np.zeros_like(s)
    for i in range(len(s)):
        step = np.zeros_like(s)
        step[i] = H
        numeric[i] = (dice(s + step, t) - dice(s - step, t)) / (2 * H)
    assert np.allclose(grad, numeric, rtol=1e-4, atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=8))
def test_smooth_l1_grad_matches_finite_differences(x):

    x = np.array(x)
    grad = smooth_l1_grad(x)
    numeric = np.zeros_like(x)
    for i in range(len(x)):
        step = np.zeros_like(x)
        step[i] = H
        numeric[i] = (smooth_l1(x + step) - smooth_l1(x - step)) / (2 * H)
    assert np.allclose(grad, numeric, rtol=1e-4, atol=1e-6)


def test_smooth_l1():

    assert smooth_l1(0.0) == 0.0
    assert smooth_l1(1.0) == 0.5
    assert smooth_l1(2.0) == 1.5
    assert smooth_l1([2.0, -0.5]) == 1.625

    # only the 8 free parameters count
    a = Homography.translation(2, 0)
    assert homography_l1(a, Homography.identity()) == 1.5
    assert homography_l1(a, a) == 0.0


def test_tlpnet_loss():

    t = np.array([0.0, 1.0, 1.0])
    assert tlpnet_loss(t, t) < 1e-5
    rng = np.random.default_rng(2)
    s = rng.uniform(0.05, 0.95, 3)
    assert tlpnet_loss(s, t, LossWeights(lambda0=0)) == dice(s, t)
    assert np.isclose(tlpnet_loss(s, t), 10 * bce(s, t) + dice(s, t))


def test_region_loss():

    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert region_loss(a, a, a, a) == 0.0
    assert region_loss(a, a, a, 1 - a) == 1.0

    rng = np.random.default_rng(3)
    p, q, r, s = rng.random((4, 5, 5))
    assert np.isclose(region_loss(p, q, r, s), dice(p, q) + dice(r, s))


def test_hinge_d():

    assert hinge_d(np.ones(4), -np.ones(4)) == 0.0
    assert hinge_d(np.zeros(4), np.zeros(4)) == 2.0
    assert hinge_d(-np.ones(4), np.ones(4)) == 4.0
    assert hinge_d(np.array([2.0, 0.5]), np.array([-3.0])) == 0.25


def test_generator_losses():

    assert gtm_gen_loss(0.0, 0.0, np.zeros(3)) == 0.0
    assert gtm_gen_loss(1.0, 1.0, np.zeros(3)) == 60.0
    assert gtm_gen_loss(0.0, 0.0, np.ones(3)) == -1.0

    img = np.full((4, 4, 3), 0.5)
    assert chm_gen_loss(img, img, np.zeros(2)) == 0.0
    assert np.isclose(chm_gen_loss(img + 0.2, img, np.zeros(2)), 1.0)
    assert chm_gen_loss(img, img, np.full(2, 2.0)) == -2.0

    try:
        chm_gen_loss(img, img[:2], np.zeros(2))
        assert False
    except ShapeError:
        assert True
