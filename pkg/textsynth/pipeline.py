'''
This module is the synthesis engine: for a background image it
proposes text regions, samples reference rectangles, renders text
patches, transforms and composites them, harmonises their colour and
filters the placements into a SynthRecord. Every stage with a learned
counterpart sits behind a backend switch.
'''

# pylint: disable=relative-beyond-top-level

import dataclasses
import logging
import time
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import cv2
import numpy as np
from scipy import ndimage

from .core import Heatmap, Homography, QuadBox, StrokeMask, SynthInstance, SynthRecord, TextPatch
from .datio import load_heatmap
from .errors import (ConfigError, EmptyRegion, EmptySynthesis, GlyphError, PlacementRejected,
                     TextOverflowError)
from .geometry import (DEFAULT_RECT_SCALE, compose, compose_over, quad_roi, quad_to_homography,
                       rect_similarity, warp_sample)
from .harmonize import DEFAULT_ALPHA, DEFAULT_LEVELS, harmonize_text
from .heatmap import HeatmapParams, propose_regions
from .textrender import Blur, apply_effects, render_patch, sample_spec
from .utils import derive_seed, luma, sorted_by_key, to_float_image, to_uint8_image

LOGGER = logging.getLogger(__name__)

# Bounds of the leading-line geometry
MAX_LINE_ANGLE_DEG = 25.0
MAX_KEYSTONE = 0.15
FALLBACK_ANGLE_DEG = 8.0
RANDOM_ANGLE_DEG = 25.0


class LocationBackend(Enum):
    PLAINNESS = 'plainness'
    HEATMAP_FILE = 'heatmap-file'
    UNIFORM = 'uniform'


class GeometryBackend(Enum):
    RULE_BASED = 'rule-based'
    IDENTITY = 'identity'
    RANDOM = 'random'


class ColorBackend(Enum):
    RAIN = 'rain'
    PASSTHROUGH = 'passthrough'


@dataclass(frozen=True)
class Backends:

    '''
    The stage implementations used by the engine. HEATMAP_FILE reads
    <heatmap_dir>/<record id>.png; UNIFORM and RANDOM are the
    ablation stand-ins (text anywhere, unconstrained perspective).
    '''

    location: LocationBackend = LocationBackend.PLAINNESS
    geometry: GeometryBackend = GeometryBackend.RULE_BASED
    color: ColorBackend = ColorBackend.RAIN
    heatmap_dir: Optional[str] = None

    def __post_init__(self):
        if self.location is LocationBackend.HEATMAP_FILE and not self.heatmap_dir:
            raise ConfigError('the heatmap-file location backend needs a heatmap directory')

    def names(self):
        return {'location': self.location.value, 'geometry': self.geometry.value, 'color': self.color.value}


@dataclass(frozen=True)
class PipelineConfig:

    '''
    Parameters of the synthesis engine.
    '''

    image_size: int = 768
    texts_per_image: tuple = (1, 8)
    overlap_required: float = 0.7
    min_text_height_px: int = 12
    seed: int = 0
    semantic_masks: Optional[str] = None
    rect_scale: float = DEFAULT_RECT_SCALE
    max_attempts: int = 100
    harmonize_alpha: float = DEFAULT_ALPHA
    harmonize_levels: int = DEFAULT_LEVELS
    size_range: tuple = (24, 96)
    effect_prob: float = 0.25
    heatmap: HeatmapParams = field(default_factory=HeatmapParams)

    def __post_init__(self):
        lo, hi = self.texts_per_image
        if not 0 <= lo <= hi:
            raise ConfigError(f'texts_per_image must be a range lo <= hi, got {self.texts_per_image}')
        if not 0 < self.overlap_required <= 1:
            raise ConfigError(f'overlap_required must lie in (0, 1], not {self.overlap_required}')
        if self.image_size < 16 or self.min_text_height_px < 1 or self.max_attempts < 1:
            raise ConfigError('image_size, min_text_height_px and max_attempts must be positive')
        if not 0 <= self.harmonize_alpha <= 1:
            raise ConfigError(f'harmonize_alpha must lie in [0, 1], not {self.harmonize_alpha}')

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['texts_per_image'] = list(self.texts_per_image)
        d['size_range'] = list(self.size_range)
        d['heatmap'] = self.heatmap.to_dict()
        return d


def _integral(support):
    return np.pad(support.astype(np.int64).cumsum(0).cumsum(1), ((1, 0), (1, 0)))


def _coverage(integral, x0, y0, side):
    # fraction of the side x side pixel square covered; pixels off the image count as uncovered
    h, w = integral.shape[0] - 1, integral.shape[1] - 1
    cx0, cy0 = max(x0, 0), max(y0, 0)
    cx1, cy1 = min(x0 + side, w), min(y0 + side, h)
    if cx0 >= cx1 or cy0 >= cy1:
        return 0.0
    inside = integral[cy1, cx1] - integral[cy0, cx1] - integral[cy1, cx0] + integral[cy0, cx0]
    return inside / float(side * side)


def sample_rect(proposal: Heatmap, rng, config: PipelineConfig):

    '''
    Rejection-samples a square reference rectangle: centre uniform
    over the proposal support (the square is then moved inside the
    image), side uniform between 1.4x the minimum text height and half
    the short image side, accepted when at least overlap_required of
    its pixels are proposed. Returns None when
    the proposal is empty or max_attempts draws fail.
    '''

    support = proposal.values > 0
    ys, xs = np.nonzero(support)
    if xs.size == 0:
        return None

    h, w = support.shape
    lo = config.min_text_height_px * 1.4
    hi = max(lo, 0.5 * min(h, w))
    integral = _integral(support)

    for attempt in range(config.max_attempts):
        k = int(rng.integers(xs.size))
        side = max(1, int(round(rng.uniform(lo, hi))))
        if side > min(h, w):
            continue
        x0 = min(max(int(xs[k]) - side // 2, 0), w - side)
        y0 = min(max(int(ys[k]) - side // 2, 0), h - side)
        if _coverage(integral, x0, y0, side) >= config.overlap_required:
            LOGGER.debug('rect accepted after %d attempts', attempt + 1)
            return QuadBox.from_bounds(x0 - 0.5, y0 - 0.5, x0 + side - 0.5, y0 + side - 0.5)
    return None


def rect_coverage(rect: QuadBox, proposal: Heatmap):
    '''Fraction of the pixel centres of rect covered by the proposal (off-image pixels uncovered)'''
    x0, y0, x1, _ = rect.bounds
    side = int(round(x1 - x0))
    return _coverage(_integral(proposal.values > 0), int(round(x0 + 0.5)), int(round(y0 + 0.5)), side)


def line_orientations(gray):

    '''
    Orientation (degrees in [-90.5, 89.5), 0 = horizontal) and strength
    of the line through every pixel, from Sobel gradients: lines run
    perpendicular to the gradient.
    '''

    gx = ndimage.sobel(gray, axis=1)
    gy = ndimage.sobel(gray, axis=0)
    angle = np.degrees(np.arctan2(gx, -gy))
    angle = np.mod(angle + 90.5, 180.0) - 90.5
    return angle, np.hypot(gx, gy)


def dominant_angle(angle, weight):

    '''
    Centre of the peak bin of the 1-degree orientation histogram
    (weighted by gradient strength) if the peak is positive, at least
    twice the median bin and within 45 degrees of horizontal;
    otherwise None.
    '''

    hist, edges = np.histogram(angle, bins=180, range=(-90.5, 89.5), weights=weight)
    peak = int(np.argmax(hist))
    if not hist[peak] > 0 or hist[peak] < 2.0 * np.median(hist):
        return None
    centre = 0.5 * (edges[peak] + edges[peak + 1])
    return float(centre) if abs(centre) <= 45.0 else None


def _corner_rotation(angles_deg, centre=128.0, size=256.0):
    # rotate each patch corner about the patch centre by its own angle
    src = QuadBox.from_bounds(0, 0, size, size)
    c = np.array([centre, centre])
    dst = []
    for p, a in zip(src.points, np.radians(angles_deg)):
        r = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        dst.append(r @ (p - c) + c)
    return quad_to_homography(src, QuadBox(dst))


def _baseline_transform(theta_top, theta_bottom, size=256.0):
    # keep corner x, tilt the top and bottom edges about their mid-points
    src = QuadBox.from_bounds(0, 0, size, size)
    half = size / 2.0
    tt, tb = np.tan(np.radians(theta_top)), np.tan(np.radians(theta_bottom))
    dst = QuadBox([(0, -half * tt), (size, half * tt), (size, size + half * tb), (0, size - half * tb)])
    return quad_to_homography(src, dst)


def fallback_geometry(rng, max_deg=FALLBACK_ANGLE_DEG):
    '''Mild random perspective: every patch corner rotated about the centre by U(+-max_deg)'''
    return _corner_rotation(rng.uniform(-max_deg, max_deg, size=4))


def random_geometry(rng, max_deg=RANDOM_ANGLE_DEG):
    '''Unconstrained random perspective used for ablation runs'''
    return _corner_rotation(rng.uniform(-max_deg, max_deg, size=4))


def fit_geometry(rect: QuadBox, background, proposal: Optional[Heatmap], rng):

    '''
    Fine transform A_n (patch frame) following the leading lines of
    the background around rect: the dominant near-horizontal
    directions of the upper and lower halves of rect grown x1.5 set
    the slopes of the patch's top and bottom edges, clamped to 25
    degrees with at most 0.15 keystone (difference of slopes). Falls
    back to a mild random perspective when no direction dominates.
    '''

    h, w = np.shape(background)[:2]
    x0, y0, x1, y1 = rect.bounds
    cx, cy = rect.centroid
    rx, ry = 0.75 * (x1 - x0), 0.75 * (y1 - y0)
    gx0, gx1 = max(int(np.floor(cx - rx)), 0), min(int(np.ceil(cx + rx)), w)
    gy0, gy1 = max(int(np.floor(cy - ry)), 0), min(int(np.ceil(cy + ry)), h)
    mid = int(round(cy)) - gy0

    if gx1 - gx0 < 3 or gy1 - gy0 < 6 or not 3 <= mid <= gy1 - gy0 - 3:
        LOGGER.debug('rect window too small for line detection, fallback geometry')
        return fallback_geometry(rng)

    angle, strength = line_orientations(luma(np.asarray(background)[gy0:gy1, gx0:gx1]))
    if proposal is not None:
        strength = strength * (1.0 + proposal.values[gy0:gy1, gx0:gx1])
    top = dominant_angle(angle[:mid], strength[:mid])
    bottom = dominant_angle(angle[mid:], strength[mid:])

    if top is None and bottom is None:
        LOGGER.debug('no dominant line direction, fallback geometry')
        return fallback_geometry(rng)
    top = bottom if top is None else top
    bottom = top if bottom is None else bottom

    top = float(np.clip(top, -MAX_LINE_ANGLE_DEG, MAX_LINE_ANGLE_DEG))
    bottom = float(np.clip(bottom, -MAX_LINE_ANGLE_DEG, MAX_LINE_ANGLE_DEG))
    tt, tb = np.tan(np.radians(top)), np.tan(np.radians(bottom))
    if abs(tt - tb) > MAX_KEYSTONE:
        mean = 0.5 * (tt + tb)
        half = 0.5 * MAX_KEYSTONE * np.sign(tt - tb)
        top, bottom = np.degrees(np.arctan(mean + half)), np.degrees(np.arctan(mean - half))

    LOGGER.debug('leading lines: top %.1f deg, bottom %.1f deg', top, bottom)
    return _baseline_transform(top, bottom)


def geometry_transform(backends: Backends, rect, background, proposal, rng):
    '''A_n from the configured geometry backend'''
    if backends.geometry is GeometryBackend.IDENTITY:
        return Homography.identity()
    if backends.geometry is GeometryBackend.RANDOM:
        return random_geometry(rng)
    return fit_geometry(rect, background, proposal, rng)


def place_instance(bg, patch: TextPatch, rect: QuadBox, backends: Backends, rng, proposal=None,
                   config: PipelineConfig = PipelineConfig()):

    '''
    Places a text patch into a background through A_m A_n (A_m maps
    the patch frame onto rect, A_n comes from the geometry backend),
    composites it and harmonises its colour. Returns the composite
    (same dtype as bg), the placed alpha and the placed quad (the
    patch bbox corners mapped through A_m A_n).
    '''

    # Standard data type input checks
    assert isinstance(patch, TextPatch)
    assert isinstance(rect, QuadBox)

    box = patch.bbox()
    if box is None:
        raise PlacementRejected('patch has no ink')

    h = compose(rect_similarity(rect), geometry_transform(backends, rect, bg, proposal, rng))
    placed_quad = h.apply_quad(QuadBox.from_bounds(*box))
    if not placed_quad.within(np.shape(bg)):
        raise PlacementRejected(f'placed quad {placed_quad} leaves the image')

    background = to_float_image(bg)
    roi = quad_roi(placed_quad, background.shape)
    layer = np.dstack([to_float_image(patch.rgb), patch.alpha])
    warped = warp_sample(layer, h, background.shape[:2], roi)
    alpha = np.clip(warped[..., 3], 0.0, 1.0)
    if not (alpha > 0).any():
        raise PlacementRejected('placed text covers no pixel')

    comp = compose_over(warped[..., :3], alpha, background)
    if backends.color is ColorBackend.RAIN:
        try:
            comp = harmonize_text(comp, alpha, config.harmonize_levels, config.harmonize_alpha)
        except EmptyRegion as err:
            raise PlacementRejected(f'cannot harmonise: {err}') from err

    if np.asarray(bg).dtype == np.uint8:
        comp = to_uint8_image(comp)
    return comp, alpha, placed_quad


def blur_placed(image, alpha, sigma):

    '''
    Gaussian blur of a composite restricted to the placed text:
    pixels within 2 sigma + 1 of the alpha support take the blurred
    value, the rest are untouched.
    '''

    region = ndimage.binary_dilation(alpha > 0, iterations=int(np.ceil(2 * sigma)) + 1)
    img = to_float_image(image)
    blurred = np.stack([ndimage.gaussian_filter(img[..., c], sigma) for c in range(img.shape[2])], axis=-1)
    img[region] = blurred[region]
    return to_uint8_image(img) if np.asarray(image).dtype == np.uint8 else img


def resize_long_side(image, size, interpolation=None):
    '''Resizes an image so that its long side equals size'''
    h, w = image.shape[:2]
    scale = size / float(max(h, w))
    if scale == 1:
        return np.array(image, copy=True)
    dims = (max(1, int(round(w * scale))), max(1, int(round(h * scale))))
    if interpolation is None:
        interpolation = cv2.INTER_AREA if scale < 1 else cv2.INTER_LINEAR
    return cv2.resize(image, dims, interpolation=interpolation)


def locate(background, backends: Backends, config: PipelineConfig, record_id=''):
    '''Text region proposal for a background from the configured location backend'''
    if backends.location is LocationBackend.UNIFORM:
        return Heatmap(np.ones(np.shape(background)[:2]))
    if backends.location is LocationBackend.HEATMAP_FILE:
        hm, _ = load_heatmap(f'{backends.heatmap_dir}/{record_id}.png')
        h, w = np.shape(background)[:2]
        values = cv2.resize(hm.values.astype(np.float32), (w, h), interpolation=cv2.INTER_NEAREST)
        return Heatmap((values > 0.5).astype(np.float64))
    return propose_regions(background, config.heatmap)


def crosses_boundary(quad: QuadBox, semantic):
    '''True if the interior of quad spans more than one semantic label'''
    labels = np.asarray(semantic)[quad.mask(np.shape(semantic))]
    return np.unique(labels).size > 1


def synthesize(background, config: PipelineConfig, backends: Backends, assets, record_id='', semantic=None):

    '''
    Generates one synthetic sample on a background: resize, propose,
    draw texts_per_image texts, render and place them largest
    rectangle first, drop placements that overlap earlier ones, are
    too small or cross a semantic boundary. The random stream is
    derived from config.seed and record_id only.
    '''

    tic = time.perf_counter()
    seed = derive_seed(config.seed, record_id)
    rng = np.random.default_rng(seed)

    image = resize_long_side(np.asarray(background), config.image_size)
    if semantic is not None:
        semantic = resize_long_side(np.asarray(semantic), config.image_size, cv2.INTER_NEAREST)
    proposal = locate(image, backends, config, record_id)

    lo, hi = config.texts_per_image
    n = int(rng.integers(lo, hi + 1))

    candidates = []
    for k in range(n):
        spec = sample_spec(assets.lexicon, assets.fonts, rng=rng, textures=assets.textures,
                           size_range=config.size_range, effect_prob=config.effect_prob)
        try:
            patch = render_patch(spec, assets.fonts)
        except (GlyphError, TextOverflowError) as err:
            LOGGER.debug('skipping text %r: %s', spec.text, err)
            continue
        pre_warp = tuple(e for e in spec.effects if not isinstance(e, Blur))
        blur = next((e for e in spec.effects if isinstance(e, Blur)), None)
        patch = apply_effects(patch, pre_warp, rng, assets.textures)

        rect = sample_rect(proposal, rng, config)
        if rect is None:
            LOGGER.debug('no rect found for text %d of %r', k, record_id)
            continue
        x0, _, x1, _ = rect.bounds
        candidates.append((x1 - x0, k, patch.with_rect(rect), blur))

    occupied = np.zeros(image.shape[:2], dtype=bool)
    instances = []
    for _, k, patch, blur in sorted_by_key(candidates, 0, reverse=True):
        try:
            comp, alpha, quad = place_instance(image, patch, patch.rect, backends, rng, proposal, config)
        except PlacementRejected as err:
            LOGGER.debug('text %d of %r rejected: %s', k, record_id, err)
            continue

        footprint = quad.mask(image.shape)
        if (footprint & occupied).any():
            LOGGER.debug('text %d of %r rejected: overlaps an earlier text', k, record_id)
            continue
        if quad.height < config.min_text_height_px:
            LOGGER.debug('text %d of %r rejected: height %.1f px', k, record_id, quad.height)
            continue
        if semantic is not None and crosses_boundary(quad, semantic):
            LOGGER.debug('text %d of %r rejected: crosses a semantic boundary', k, record_id)
            continue
        strokes = alpha >= 0.5
        if not strokes.any():
            continue

        image = blur_placed(comp, alpha, blur.sigma) if blur is not None else comp
        occupied |= footprint
        instances.append(SynthInstance(quad=quad, mask=StrokeMask(strokes, len(instances)), text=patch.text))

    if not instances and n > 0:
        warnings.warn(EmptySynthesis(f'no text could be placed on {record_id!r}'), stacklevel=2)

    LOGGER.debug('synthesized %r: %d of %d texts in %.2fs', record_id, len(instances), n,
                 time.perf_counter() - tic)
    provenance = {'background': record_id, 'source_size': list(np.shape(background)[:2]),
                  'backends': backends.names()}
    return SynthRecord(image, instances, seed, provenance, record_id=record_id, empty=not instances)
