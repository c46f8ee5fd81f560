'''
This module generates appearance-similarity heatmaps: where in a
text-erased background could a text instance of a given look sit?
It builds the three-region appearance descriptor of an instance,
evaluates the appearance distance of every pixel, normalises,
combines, edge-segments, thresholds and cleans up the result into a
binary text-region map. It also provides the model-free plainness
proposal used to pick text locations on new backgrounds.
'''

# pylint: disable=relative-beyond-top-level

import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import Heatmap, QuadBox, SceneRecord, StrokeMask
from .errors import (ConfigError, DegenerateBBox, EmptyInstance, NoFiniteDistance,
                     NoValidInstances, ShapeError)
from .utils import luma, to_float_image

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeatmapParams:

    '''
    Parameters of heatmap generation. stride subsamples the anchor
    rows of the target box and region_cap the pixels of each
    descriptor region; stride=1 with region_cap=None is the exact
    evaluation.
    '''

    lambda_edge: float = 5.0
    threshold: float = 0.75
    min_region_area_ratio: float = 0.5
    min_peak_score: float = 0.9
    inner_dilate_ratio: float = 0.15
    outer_dilate_ratio: float = 0.40
    stride: int = 2
    region_cap: Optional[int] = 512
    weights: tuple = (0.6, 0.3, 0.1)

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ConfigError(f'heatmap threshold must lie in (0, 1), not {self.threshold}')
        if not self.lambda_edge > 0:
            raise ConfigError(f'lambda_edge must be positive, not {self.lambda_edge}')
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigError(f'stride must be a positive integer, not {self.stride}')
        if self.region_cap is not None and self.region_cap < 1:
            raise ConfigError(f'region_cap must be positive or None, not {self.region_cap}')
        if not 0 < self.inner_dilate_ratio < self.outer_dilate_ratio:
            raise ConfigError('dilation ratios must satisfy 0 < inner < outer')
        _check_weights(self.weights)

    @property
    def exact(self):
        return self.stride == 1 and self.region_cap is None

    def as_exact(self):
        '''Copy of these parameters with exact evaluation switched on'''
        return dataclasses.replace(self, stride=1, region_cap=None)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['weights'] = list(self.weights)
        return d


def _check_weights(weights):
    w = tuple(float(v) for v in weights)
    if len(w) != 3 or not all(0 < v <= 1 for v in w):
        raise ConfigError(f'need three region weights in (0, 1], got {weights}')
    if not w[0] > w[1] > w[2]:
        raise ConfigError(f'region weights must be strictly decreasing, got {weights}')
    if abs(sum(w) - 1) > 1e-9:
        raise ConfigError(f'region weights must sum to 1, got {weights}')


@dataclass(frozen=True)
class AppearanceDescriptor:

    '''
    The look of a text instance as three disjoint, weighted pixel
    sets: the strokes (R_1), an inner band around them (R_2) and an
    outer band (R_3). Regions hold absolute (x, y) pixel coordinates
    in raster order; center is the quad centroid.
    '''

    regions: tuple
    weights: tuple
    center: tuple

    def __post_init__(self):
        if len(self.regions) != 3:
            raise ValueError(f'a descriptor has three regions, got {len(self.regions)}')
        _check_weights(self.weights)

    def offsets(self, i):
        '''Region i as (dx, dy) offsets from the centre'''
        return self.regions[i] - np.asarray(self.center)

    def sizes(self):
        return tuple(len(r) for r in self.regions)


def dilation_radii(text_height, params: HeatmapParams):

    '''
    Returns (r_in, r_out), the integer dilation radii of the inner
    and outer contour bands for a text of the given height.
    '''

    r_in = max(1, int(round(params.inner_dilate_ratio * text_height)))
    r_out = max(r_in + 1, int(round(params.outer_dilate_ratio * text_height)))
    return r_in, r_out


def _dilate(bitmap, r):
    # square structuring element of side 2r + 1, clipped at the border
    return ndimage.maximum_filter(bitmap.astype(np.uint8), size=2 * r + 1, mode='constant', cval=0) > 0


def _coords(bitmap):
    ys, xs = np.nonzero(bitmap)
    return np.stack([xs, ys], axis=1).astype(np.int64)


def build_descriptor(mask: StrokeMask, quad: QuadBox, params: HeatmapParams):

    '''
    Builds the appearance descriptor of one text instance from its
    stroke mask and quad. The contour bands are the dilations of the
    mask by r_in and r_out minus what lies inside.
    '''

    # Standard data type input checks
    assert isinstance(mask, StrokeMask)
    assert isinstance(quad, QuadBox)

    if mask.is_empty():
        raise EmptyInstance(f'cannot describe an instance with an empty mask ({mask})')

    r_in, r_out = dilation_radii(quad.height, params)
    strokes = mask.bitmap
    inner = _dilate(strokes, r_in)
    outer = _dilate(strokes, r_out)

    regions = (_coords(strokes), _coords(inner & ~strokes), _coords(outer & ~inner))
    return AppearanceDescriptor(regions=regions, weights=tuple(params.weights), center=quad.centroid)


def _subsample(points, cap):
    n = len(points)
    if cap is None or n <= cap:
        return points, 1.0
    idx = np.floor(np.arange(cap) * (n / cap)).astype(np.int64)
    return points[idx], n / cap


def _shift_costs(img, target: AppearanceDescriptor, cap):

    '''
    Cost C(s) of comparing every descriptor pixel p with p + s, for
    all shifts s keeping the whole descriptor in bounds. Returns the
    cost array and the (sx, sy) of its top-left entry.
    '''

    h, w = img.shape[:2]
    nonempty = [r for r in target.regions if len(r)]
    allpts = np.concatenate(nonempty)
    sx_lo, sx_hi = -allpts[:, 0].min(), w - 1 - allpts[:, 0].max()
    sy_lo, sy_hi = -allpts[:, 1].min(), h - 1 - allpts[:, 1].max()
    vh, vw = sy_hi - sy_lo + 1, sx_hi - sx_lo + 1

    costs = np.zeros((vh, vw))
    for region, weight in zip(target.regions, target.weights):
        if not len(region):
            continue
        pts, scale = _subsample(region, cap)
        acc = np.zeros((vh, vw))
        for px, py in pts:
            window = img[py + sy_lo:py + sy_lo + vh, px + sx_lo:px + sx_lo + vw]
            acc += np.sqrt(np.sum((window - img[py, px]) ** 2, axis=-1))
        costs += weight * scale * acc
    return costs, (sx_lo, sy_lo)


def _anchor_runs(anchors, stride):
    rows = np.nonzero(anchors.any(axis=1))[0][::stride]
    for v in rows:
        cols = np.nonzero(anchors[v])[0]
        breaks = np.nonzero(np.diff(cols) > 1)[0] + 1
        for run in np.split(cols, breaks):
            yield int(v), int(run[0]), int(run[-1])


def appearance_distance_map(erased, target: AppearanceDescriptor, bbox: QuadBox, params: HeatmapParams):

    '''
    Returns the appearance distance map H_d of a target instance: at
    every pixel (x, y), the smallest weighted colour difference
    between the descriptor and a copy of it moved by (x - u, y - v),
    over all anchors (u, v) inside the target box. Copies that fall
    partly outside the image count as +inf.
    '''

    # Standard data type input checks
    assert isinstance(target, AppearanceDescriptor)
    assert isinstance(bbox, QuadBox)

    img = to_float_image(erased)
    if img.ndim == 2:
        img = img[..., None]
    img = img[..., :3]
    h, w = img.shape[:2]

    if not len(target.regions[0]):
        raise EmptyInstance('descriptor has no stroke pixels')
    anchors = bbox.mask((h, w))
    if not anchors.any():
        raise DegenerateBBox(f'{bbox} covers no pixel centre of a {w}x{h} image')

    tic = time.perf_counter()
    valid_costs, (sx_lo, sy_lo) = _shift_costs(img, target, params.region_cap)

    # Shift grid covering x - u, y - v for every pixel and anchor
    ays, axs = np.nonzero(anchors)
    ux_min, ux_max, vy_min, vy_max = axs.min(), axs.max(), ays.min(), ays.max()
    sx_min, sy_min = -ux_max, -vy_max
    grid = np.full((h + vy_max - vy_min, w + ux_max - ux_min), np.inf)

    gy0, gx0 = sy_lo - sy_min, sx_lo - sx_min
    vh, vw = valid_costs.shape
    ty0, tx0 = max(gy0, 0), max(gx0, 0)
    ty1, tx1 = min(gy0 + vh, grid.shape[0]), min(gx0 + vw, grid.shape[1])
    if ty0 < ty1 and tx0 < tx1:
        grid[ty0:ty1, tx0:tx1] = valid_costs[ty0 - gy0:ty1 - gy0, tx0 - gx0:tx1 - gx0]

    # Sliding minimum over each horizontal run of anchors
    dist = np.full((h, w), np.inf)
    filtered = {}
    for v, a, b in _anchor_runs(anchors, params.stride):
        length = b - a + 1
        if length not in filtered:
            filtered[length] = ndimage.minimum_filter1d(grid, length, axis=1, mode='constant', cval=np.inf)
        r0 = vy_max - v
        c0 = ux_max - b + length // 2
        np.minimum(dist, filtered[length][r0:r0 + h, c0:c0 + w], out=dist)

    LOGGER.debug('appearance distance map %dx%d in %.2fs (exact=%s)', w, h, time.perf_counter() - tic,
                  params.exact)
    return Heatmap(dist)


def consistency_heatmap(hd: Heatmap):

    '''
    Normalises a distance map into an appearance consistency heatmap
    (1 - d / d_max)^3, where d_max is the largest finite distance and
    infinite distances count as d_max.
    '''

    d = hd.values
    finite = np.isfinite(d)
    if not finite.any():
        raise NoFiniteDistance('distance map holds no finite value')

    d_max = d[finite].max()
    if d_max == 0:
        # every reachable placement matches exactly
        return Heatmap(finite.astype(np.float64))

    d = np.where(finite, d, d_max)
    return Heatmap((1.0 - d / d_max) ** 3)


def combine_heatmaps(maps):

    '''
    Pixelwise maximum of the per-instance consistency heatmaps.
    '''

    maps = list(maps)
    if not maps:
        raise ValueError('cannot combine an empty list of heatmaps')
    shape = maps[0].shape
    for m in maps:
        if m.shape != shape:
            raise ShapeError(f'heatmap dimensions differ: {m.shape} vs {shape}')
    return Heatmap(np.maximum.reduce([m.values for m in maps]))


def sobel_magnitude(img):

    '''
    Gradient magnitude of the luma of an image, divided by its
    image-wide maximum (all zeros for a flat image).
    '''

    g = luma(img) if np.ndim(img) == 3 else to_float_image(img)
    mag = np.hypot(ndimage.sobel(g, axis=1), ndimage.sobel(g, axis=0))
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def bbox_heatmap(quads, shape):
    '''1.0 inside any of the quads, else 0'''
    out = np.zeros(shape[:2], dtype=bool)
    for q in quads:
        out |= q.mask(shape)
    return out.astype(np.float64)


def edge_segment(ha: Heatmap, erased, quads, params: HeatmapParams):

    '''
    Cuts the consistency heatmap along the edges of the erased image:
    H_e = max(H_a - lambda * Sobel(I), H_BBOX), clamped to [0, 1].
    '''

    erased = np.asarray(erased)
    if erased.shape[:2] != ha.shape:
        raise ShapeError(f'heatmap {ha.shape} does not match image {erased.shape[:2]}')

    he = np.maximum(ha.values - params.lambda_edge * sobel_magnitude(erased), bbox_heatmap(quads, ha.shape))
    return Heatmap(np.clip(he, 0.0, 1.0))


def threshold_heatmap(he: Heatmap, T: float):
    '''Keeps the values strictly above T, zeroes the rest'''
    if not 0 < T < 1:
        raise ValueError(f'threshold must lie in (0, 1), not {T}')
    v = he.values
    return Heatmap(np.where(v > T, v, 0.0))


def _filter_components(values, seeds, reference_area, params: HeatmapParams):

    '''
    Labels the 4-connected components of the support of values and
    keeps those touching seeds, or large (area relative to
    reference_area) and strong (peak value) enough.
    '''

    labels, n = ndimage.label(values > 0)
    if n == 0:
        return np.zeros(values.shape, dtype=bool)

    index = np.arange(1, n + 1)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    peaks = np.asarray(ndimage.maximum(values, labels, index))
    touching = np.asarray(ndimage.maximum(seeds, labels, index)) > 0 if seeds is not None else np.zeros(n, bool)

    keep = touching | ((areas >= params.min_region_area_ratio * reference_area)
                       & (peaks >= params.min_peak_score))
    LOGGER.debug('kept %d of %d components', int(keep.sum()), n)

    lut = np.zeros(n + 1, dtype=bool)
    lut[1:] = keep
    return lut[labels]


def fill_small_holes(bitmap, max_area):

    '''
    Fills the background components fully enclosed by a binary map
    whose area is at most max_area.
    '''

    holes = ndimage.binary_fill_holes(bitmap) & ~bitmap
    labels, n = ndimage.label(holes)
    if n == 0:
        return bitmap.copy()
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    small = sizes <= max_area
    small[0] = False
    return bitmap | small[labels]


def finalize_regions(ht: Heatmap, quads, params: HeatmapParams):

    '''
    Turns a thresholded heatmap into the final binary text-region
    map: drops small or weak components that touch no valid quad,
    inpaints small holes and always keeps the quad interiors.
    '''

    quads = list(quads)
    hbbox = bbox_heatmap(quads, ht.shape)
    if quads:
        reference_area = float(np.median([abs(q.area) for q in quads]))
        hole_side = float(np.median([q.height for q in quads]))
    else:
        reference_area, hole_side = float(ht.values.size), 0.0

    kept = _filter_components(ht.values, hbbox, reference_area, params)
    kept = fill_small_holes(kept, hole_side ** 2)
    return Heatmap((kept | (hbbox > 0)).astype(np.float64))


def generate_gt_stages(rec: SceneRecord, params: HeatmapParams):

    '''
    Runs heatmap generation on a scene record and returns every
    intermediate map in a dict with keys 'ha', 'he', 'ht' and 'hf'.
    '''

    # Standard data type input checks
    assert isinstance(rec, SceneRecord)

    valid = [inst for inst in rec.instances if inst.valid]
    if not valid:
        raise NoValidInstances(f'record {rec.record_id!r} has no valid text instance')

    tic = time.perf_counter()
    per_instance = []
    for inst in valid:
        descriptor = build_descriptor(inst.mask, inst.quad, params)
        hd = appearance_distance_map(rec.erased, descriptor, inst.quad, params)
        per_instance.append(consistency_heatmap(hd))

    quads = [inst.quad for inst in valid]
    ha = combine_heatmaps(per_instance)
    he = edge_segment(ha, rec.erased, quads, params)
    ht = threshold_heatmap(he, params.threshold)
    hf = finalize_regions(ht, quads, params)

    LOGGER.debug('heatmap for %r from %d instances in %.2fs', rec.record_id, len(valid),
                 time.perf_counter() - tic)
    return {'ha': ha, 'he': he, 'ht': ht, 'hf': hf}


def generate_gt(rec: SceneRecord, params: HeatmapParams):

    '''
    Returns the final binary text-region heatmap H_f of a scene
    record, built from all of its valid instances.
    '''

    return generate_gt_stages(rec, params)['hf']


def plainness_map(background, window=None):

    '''
    1 - normalised local Sobel energy: the Sobel magnitude box
    averaged over a square window (default side min(H, W) // 16).
    '''

    h, w = np.shape(background)[:2]
    if window is None:
        window = max(1, min(h, w) // 16)
    energy = ndimage.uniform_filter(sobel_magnitude(background), size=window, mode='nearest')
    peak = energy.max()
    if peak > 0:
        energy = energy / peak
    return 1.0 - energy


def propose_regions(background, params: HeatmapParams):

    '''
    Model-free text location proposal for a new background: plain
    (low-texture) areas above the threshold, keeping only components
    that are large and strong enough. Returns a binary Heatmap.
    '''

    h, w = np.shape(background)[:2]
    window = max(1, min(h, w) // 16)
    plain = plainness_map(background, window)
    plain = np.where(plain > params.threshold, plain, 0.0)
    kept = _filter_components(plain, None, float(window * window), params)
    return Heatmap(kept.astype(np.float64))
