'''
This module turns a DecompST record and one of its text instances
into a training triplet for the appearance adaptation networks: the
instance is rectified to a horizontal box, its geometry and colour
are perturbed, other instances are randomly erased from the
background and the ground truth of the fine transform is recorded.
'''

# pylint: disable=relative-beyond-top-level

import dataclasses
import logging
from dataclasses import dataclass

import cv2
import numpy as np
from sklearn.cluster import KMeans

from .core import PATCH_SIZE, Homography, QuadBox, SceneRecord, TextPatch
from .errors import ConfigError, InvalidInstance
from .geometry import (DEFAULT_RECT_SCALE, compose, gt_matrix, make_rect, quad_to_homography,
                       rect_similarity, rectified_quad, warp_sample)
from .utils import derive_seed, quad_mask, to_float_image, to_uint8_image

LOGGER = logging.getLogger(__name__)

# Centroids closer than this (8-bit RGB distance) are one colour
MERGE_DISTANCE = 24.0


@dataclass(frozen=True)
class JitterParams:

    '''
    Magnitudes of the perturbations applied while building training
    triplets. hsl_jitter is (hue degrees, saturation, lightness).
    '''

    aspect_range: tuple = (0.8, 1.25)
    center_jitter_frac: float = 0.15
    hsl_jitter: tuple = (20.0, 0.2, 0.2)
    erase_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.aspect_range
        if not 0 < lo <= 1 <= hi:
            raise ConfigError(f'aspect range must satisfy 0 < lo <= 1 <= hi, got {self.aspect_range}')
        if self.center_jitter_frac < 0 or any(v < 0 for v in self.hsl_jitter):
            raise ConfigError('jitter magnitudes must be non-negative')
        if len(self.hsl_jitter) != 3:
            raise ConfigError(f'hsl_jitter needs three values, got {self.hsl_jitter}')
        if not 0 <= self.erase_prob <= 1:
            raise ConfigError(f'erase_prob must lie in [0, 1], not {self.erase_prob}')

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['aspect_range'] = list(self.aspect_range)
        d['hsl_jitter'] = list(self.hsl_jitter)
        return d


@dataclass(frozen=True)
class TrainTriplet:

    '''
    One training sample: the processed text patch P_pt with its
    reference rectangle, the background I_bg, the ground-truth fine
    transform A_n, the ground-truth stroke and box masks and the
    source image I_s.
    '''

    patch: TextPatch
    rect: QuadBox
    bg: np.ndarray
    gt_matrix: Homography
    gt_alpha: np.ndarray
    gt_bm: np.ndarray
    source: np.ndarray

    @property
    def a_m(self):
        '''Coarse transform placing the patch frame onto rect'''
        return rect_similarity(self.rect)


def _instance(rec, idx):
    if not 0 <= idx < len(rec.instances):
        raise IndexError(f'record {rec.record_id!r} has no instance {idx}')
    inst = rec.instances[idx]
    if not inst.valid:
        raise InvalidInstance(f'instance {idx} of record {rec.record_id!r} is not valid')
    return inst


def _text_layer(rec, inst):
    # original RGB with the stroke mask as a fourth channel
    return np.dstack([to_float_image(rec.original)[..., :3], inst.mask.bitmap.astype(np.float64)])


def rectify_instance(rec: SceneRecord, idx: int):

    '''
    Warps the text pixels of instance idx (RGB + stroke alpha, as an
    (H, W, 4) float layer) so that its quad becomes the axis-aligned
    rectangle of the same centre and mean edge lengths. Returns the
    layer and that rectangle.
    '''

    # Standard data type input checks
    assert isinstance(rec, SceneRecord)

    inst = _instance(rec, idx)
    rect_quad = rectified_quad(inst.quad)
    h_r = quad_to_homography(inst.quad, rect_quad)
    layer = warp_sample(_text_layer(rec, inst), h_r, rec.shape)
    return layer, rect_quad


def jitter_geometry(rect_quad: QuadBox, params: JitterParams, rng):

    '''
    Scales the width of a box by u ~ U(aspect_range) about its
    centre and moves the centre by (dx, dy), each ~ U(+-frac * height).
    '''

    u = rng.uniform(*params.aspect_range)
    reach = params.center_jitter_frac * rect_quad.height
    dx, dy = rng.uniform(-reach, reach, size=2)

    c = np.asarray(rect_quad.centroid)
    pts = (rect_quad.points - c) * np.array([u, 1.0]) + c + np.array([dx, dy])
    return QuadBox(pts)


def _merge_centroids(centroids, weights):
    # greedy: heaviest cluster first, absorb any later centroid within MERGE_DISTANCE
    order = np.argsort(-weights, kind='stable')
    kept, mass = [], []
    for i in order:
        for j, c in enumerate(kept):
            if np.linalg.norm(centroids[i] - c) < MERGE_DISTANCE:
                total = mass[j] + weights[i]
                kept[j] = (c * mass[j] + centroids[i] * weights[i]) / total if total > 0 else c
                mass[j] = total
                break
        else:
            kept.append(centroids[i].copy())
            mass.append(weights[i])
    return np.array(kept)


def quantize_colors(text_rgb, alpha, k_max=3, rng=None):

    '''
    Reduces the text pixels (alpha > 0) to at most k_max colours:
    alpha-weighted K-means (k-means++ seeding, 20 iterations) on
    8-bit RGB, centroids closer than 24 merged, and every text pixel
    replaced by its nearest centroid. Returns an image of the same
    dtype; other pixels are untouched.
    '''

    rgb = to_float_image(text_rgb)
    a = np.asarray(alpha, dtype=np.float64)
    support = a > 0
    if not support.any():
        raise ValueError('cannot quantise the colours of an empty text layer')

    rng = rng if rng is not None else np.random.default_rng(0)
    pixels = rgb[support] * 255.0
    weights = a[support]
    k = int(min(k_max, len(np.unique(np.rint(pixels), axis=0))))

    model = KMeans(n_clusters=k, init='k-means++', n_init=1, max_iter=20,
                   random_state=int(rng.integers(2 ** 31 - 1)))
    labels = model.fit_predict(pixels, sample_weight=weights)
    cluster_mass = np.bincount(labels, weights=weights, minlength=k)
    palette = np.clip(np.rint(_merge_centroids(model.cluster_centers_, cluster_mass)), 0, 255)

    nearest = np.argmin(np.linalg.norm(pixels[:, None, :] - palette[None, :, :], axis=2), axis=1)
    out = rgb.copy()
    out[support] = palette[nearest] / 255.0
    LOGGER.debug('quantised %d text pixels to %d colours', len(pixels), len(palette))

    return to_uint8_image(out) if np.asarray(text_rgb).dtype == np.uint8 else out


def shift_hsl(text_rgb, alpha, dh=0.0, ds=0.0, dl=0.0):

    '''
    Rotates the hue of the text pixels (alpha > 0) by dh degrees and
    shifts saturation and lightness by ds and dl (clamped to [0, 1]).
    '''

    rgb = to_float_image(text_rgb)
    support = np.asarray(alpha) > 0

    hls = cv2.cvtColor(rgb.astype(np.float32), cv2.COLOR_RGB2HLS)
    hls[..., 0] = np.mod(hls[..., 0] + dh, 360.0)
    hls[..., 1] = np.clip(hls[..., 1] + dl, 0.0, 1.0)
    hls[..., 2] = np.clip(hls[..., 2] + ds, 0.0, 1.0)
    shifted = np.clip(cv2.cvtColor(hls, cv2.COLOR_HLS2RGB).astype(np.float64), 0.0, 1.0)

    out = rgb.copy()
    out[support] = shifted[support]
    return to_uint8_image(out) if np.asarray(text_rgb).dtype == np.uint8 else out


def jitter_hsl(text_rgb, alpha, params: JitterParams, rng):
    '''One random (dh, ds, dl) draw within params.hsl_jitter applied to every text pixel'''
    mh, ms, ml = params.hsl_jitter
    dh, ds, dl = rng.uniform(-mh, mh), rng.uniform(-ms, ms), rng.uniform(-ml, ml)
    return shift_hsl(text_rgb, alpha, dh, ds, dl)


def erase_others(rec: SceneRecord, keep_idx: int, params: JitterParams, rng):

    '''
    Builds the background of a triplet: starts from the erased image
    and, with probability 1 - erase_prob for each non-target
    instance, restores its original text pixels under its stroke
    mask. The target's stroke pixels always stay erased.
    '''

    bg = np.array(rec.erased, copy=True)
    target = rec.instances[keep_idx].mask.bitmap
    for k, inst in enumerate(rec.instances):
        if k == keep_idx:
            continue
        # one draw per instance keeps the stream aligned whatever the outcome
        if rng.random() >= params.erase_prob:
            restore = inst.mask.bitmap & ~target
            bg[restore] = rec.original[restore]
    return bg


def _patch_bbox_mask(patch_quad, alpha):
    # axis-aligned box covering the patch quad and every inked pixel
    cover = quad_mask(patch_quad.points, (PATCH_SIZE, PATCH_SIZE)) | (alpha > 0)
    out = np.zeros(cover.shape, dtype=bool)
    ys, xs = np.nonzero(cover)
    if xs.size:
        out[ys.min():ys.max() + 1, xs.min():xs.max() + 1] = True
    return out


def build_triplet(rec: SceneRecord, idx: int, params: JitterParams, rect_scale=DEFAULT_RECT_SCALE, rng=None):

    '''
    Runs the full preprocessing flow for instance idx of a record
    and returns its TrainTriplet. Without an explicit rng the random
    stream is derived from params.seed, the record id and idx, so the
    result does not depend on processing order.
    '''

    # Standard data type input checks
    assert isinstance(rec, SceneRecord)
    assert isinstance(params, JitterParams)

    inst = _instance(rec, idx)
    if rng is None:
        rng = np.random.default_rng(derive_seed(params.seed, rec.record_id, idx))

    rect_quad = rectified_quad(inst.quad)
    h_r = quad_to_homography(inst.quad, rect_quad)
    jittered = jitter_geometry(rect_quad, params, rng)
    jitter = quad_to_homography(rect_quad, jittered)

    rect = make_rect(jittered, rect_scale)
    a_m = rect_similarity(rect)
    to_patch = a_m.inverse()

    # one resampling straight from the source into the patch frame
    layer = warp_sample(_text_layer(rec, inst), compose(to_patch, compose(jitter, h_r)),
                        (PATCH_SIZE, PATCH_SIZE))
    rgb, alpha = layer[..., :3], np.clip(layer[..., 3], 0.0, 1.0)
    if (alpha > 0).any():
        rgb = quantize_colors(rgb, alpha, rng=rng)
        rgb = jitter_hsl(rgb, alpha, params, rng)
    else:
        LOGGER.warning('instance %d of %r has no ink inside its patch', idx, rec.record_id)

    pt_quad = to_patch.apply_quad(jittered)
    before_quad = to_patch.apply_quad(inst.quad)
    patch = TextPatch(to_uint8_image(rgb), alpha, _patch_bbox_mask(pt_quad, alpha), inst.text or '', rect)

    return TrainTriplet(
        patch=patch,
        rect=rect,
        bg=erase_others(rec, idx, params, rng),
        gt_matrix=gt_matrix(pt_quad, before_quad),
        gt_alpha=inst.mask.bitmap.astype(np.float64),
        gt_bm=inst.quad.mask(rec.shape),
        source=np.array(rec.original, copy=True),
    )


def build_triplets(rec: SceneRecord, params: JitterParams, rect_scale=DEFAULT_RECT_SCALE):
    '''Triplets for every valid instance of a record, keyed by instance index'''
    return {k: build_triplet(rec, k, params, rect_scale) for k in rec.valid_indices()}
