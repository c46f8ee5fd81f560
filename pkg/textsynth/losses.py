'''
This module contains the training losses of the location, geometry
and colour networks as plain numerical functions over numpy arrays,
with analytic gradients for dice and smooth-L1. Discriminator scores
are supplied by the caller.
'''

# pylint: disable=relative-beyond-top-level

from dataclasses import dataclass

import numpy as np

from .core import Homography
from .errors import ShapeError

BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:

    '''
    Weights of the composite losses: lambda0 (BCE term of the location
    loss), lambda1 and lambda2 (L1 and region terms of the geometry
    generator), lambda3 (reconstruction term of the colour generator).
    '''

    lambda0: float = 10.0
    lambda1: float = 50.0
    lambda2: float = 10.0
    lambda3: float = 5.0

    def __post_init__(self):
        for name in ('lambda0', 'lambda1', 'lambda2', 'lambda3'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be non-negative, not {getattr(self, name)}')


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f'shape mismatch: {a.shape} vs {b.shape}')
    return a, b


def bce(s, t):
    '''Mean binary cross-entropy of scores s against targets t (s clamped to [1e-7, 1 - 1e-7])'''
    s, t = _pair(s, t)
    s = np.clip(s, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(np.mean(-(t * np.log(s) + (1.0 - t) * np.log(1.0 - s))))


def dice(s, t):

    '''
    Global dice loss 1 - 2 sum(s t) / (sum(s) + sum(t)). Two all-zero
    inputs match perfectly and give 0.
    '''

    s, t = _pair(s, t)
    union = s.sum() + t.sum()
    if union == 0:
        return 0.0
    return float(1.0 - 2.0 * np.sum(s * t) / union)


def dice_grad(s, t):
    '''Gradient of dice(s, t) with respect to s'''
    s, t = _pair(s, t)
    union = s.sum() + t.sum()
    if union == 0:
        return np.zeros_like(s)
    inter = np.sum(s * t)
    return -2.0 * (t * union - inter) / union ** 2


def tlpnet_loss(pred, gt, w: LossWeights = LossWeights()):
    '''Location network loss: lambda0 * bce + dice'''
    return w.lambda0 * bce(pred, gt) + dice(pred, gt)


def smooth_l1(x):

    '''
    Summed smooth-L1: 0.5 x^2 where |x| < 1, |x| - 0.5 elsewhere.
    '''

    a = np.abs(np.asarray(x, dtype=np.float64))
    return float(np.sum(np.where(a < 1.0, 0.5 * a ** 2, a - 0.5)))


def smooth_l1_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 1.0, x, np.sign(x))


def homography_l1(pred: Homography, gt: Homography):
    '''smooth_l1 over the 8 free parameters of two homographies (m[2][2] excluded)'''
    return smooth_l1(pred.free_params() - gt.free_params())


def region_loss(pred_alpha, gt_alpha, pred_bm, gt_bm):
    '''Dice at stroke-mask level plus dice at box-mask level'''
    return dice(pred_alpha, gt_alpha) + dice(pred_bm, gt_bm)


def hinge_d(real_scores, fake_scores):
    '''Hinge discriminator loss: mean relu(1 - real) + mean relu(1 + fake)'''
    real = np.asarray(real_scores, dtype=np.float64)
    fake = np.asarray(fake_scores, dtype=np.float64)
    return float(np.mean(np.maximum(0.0, 1.0 - real)) + np.mean(np.maximum(0.0, 1.0 + fake)))


def gtm_gen_loss(l1, region, fake_scores, w: LossWeights = LossWeights()):
    '''Geometry generator loss: lambda1 * l1 + lambda2 * region - mean(fake scores)'''
    return float(w.lambda1 * l1 + w.lambda2 * region - np.mean(np.asarray(fake_scores, dtype=np.float64)))


def chm_gen_loss(out, source, fake_scores, w: LossWeights = LossWeights()):
    '''Colour generator loss: lambda3 * mean |out - source| - mean(fake scores)'''
    out, source = _pair(out, source)
    return float(w.lambda3 * np.mean(np.abs(out - source)) - np.mean(np.asarray(fake_scores, dtype=np.float64)))
