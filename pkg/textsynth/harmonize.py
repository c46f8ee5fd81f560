'''
This module contains region-aware adaptive instance normalisation
(restyling the foreground of a feature map with the statistics of its
background) and the model-free colour harmonisation built on it.
'''

# pylint: disable=relative-beyond-top-level

import logging
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import EmptyRegion, ShapeError
from .utils import to_float_image, to_uint8_image

LOGGER = logging.getLogger(__name__)

EPS = 1e-5
DEFAULT_LEVELS = 3
DEFAULT_ALPHA = 0.8


@dataclass(frozen=True)
class RegionStats:

    '''
    Channel-wise mean and standard deviation of a feature map over a
    (soft) region. std already includes eps, so std >= sqrt(eps).
    '''

    mean: np.ndarray
    std: np.ndarray
    eps: float = EPS


def _as_channels(features):
    f = np.asarray(features, dtype=np.float64)
    return f[..., None] if f.ndim == 2 else f


def masked_stats(features, mask, eps=EPS):

    '''
    Returns the RegionStats of features (H, W) or (H, W, C) weighted
    by a real-valued mask (H, W):
    mu = sum(F M) / sum(M), sigma = sqrt(sum(M (F - mu)^2) / sum(M) + eps).
    '''

    f = _as_channels(features)
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != f.shape[:2]:
        raise ShapeError(f'mask {m.shape} does not match features {f.shape[:2]}')

    total = m.sum()
    if not total > 0:
        raise EmptyRegion('mask selects no pixel')

    w = m[..., None]
    mean = (f * w).sum(axis=(0, 1)) / total
    var = (w * (f - mean) ** 2).sum(axis=(0, 1)) / total
    return RegionStats(mean=mean, std=np.sqrt(var + eps), eps=eps)


def rain(features, fg_mask, eps=EPS):

    '''
    Region-aware adaptive instance normalisation: normalises the
    features with the foreground statistics and re-scales them with
    the background (1 - mask) statistics. The formula is applied at
    every pixel; callers keep the foreground part.
    '''

    f = _as_channels(features)
    m = np.asarray(fg_mask, dtype=np.float64)
    fg = masked_stats(f, m, eps)
    try:
        bg = masked_stats(f, 1.0 - m, eps)
    except EmptyRegion as err:
        raise EmptyRegion('mask leaves no background pixel') from err

    out = bg.std * (f - fg.mean) / fg.std + bg.mean
    return out[..., 0] if np.ndim(features) == 2 else out


def rain_foreground(features, fg_mask, eps=EPS):

    '''
    rain blended back by the mask: foreground pixels take the
    restyled value, background pixels keep their own.
    '''

    f = _as_channels(features)
    m = np.asarray(fg_mask, dtype=np.float64)[..., None]
    out = m * _as_channels(rain(f, m[..., 0], eps)) + (1.0 - m) * f
    return out[..., 0] if np.ndim(features) == 2 else out


def _window(mask, shape):
    # bounding box of the mask, grown to twice its size about its centre
    ys, xs = np.nonzero(mask)
    h, w = shape[:2]
    cy, cx = (ys.min() + ys.max()) / 2.0, (xs.min() + xs.max()) / 2.0
    hh, hw = ys.max() - ys.min() + 1, xs.max() - xs.min() + 1
    y0, y1 = int(np.floor(cy - hh)), int(np.ceil(cy + hh))
    x0, x1 = int(np.floor(cx - hw)), int(np.ceil(cx + hw))
    return max(y0, 0), min(y1 + 1, h), max(x0, 0), min(x1 + 1, w)


def _laplacian_pyramid(img, levels):
    gauss = [img]
    for _ in range(levels - 1):
        if min(gauss[-1].shape[:2]) < 2:
            break
        gauss.append(cv2.pyrDown(gauss[-1]))
    bands = []
    for fine, coarse in zip(gauss[:-1], gauss[1:]):
        up = cv2.pyrUp(coarse, dstsize=(fine.shape[1], fine.shape[0]))
        bands.append(fine - up)
    bands.append(gauss[-1])
    return bands


def _collapse(bands):
    img = bands[-1]
    for band in reversed(bands[:-1]):
        img = cv2.pyrUp(img, dstsize=(band.shape[1], band.shape[0])) + band
    return img


def harmonize_text(comp, text_mask, levels=DEFAULT_LEVELS, alpha=DEFAULT_ALPHA):

    '''
    Harmonises the colour of composited text with its surroundings.
    Within a local window (the text box grown x2) each band of a
    Laplacian pyramid with `levels` levels has its text region
    restyled by rain against the local background; the collapsed
    result is blended into comp with weight alpha * text_mask, so
    pixels outside the mask are never touched. Returns an image of
    the same dtype as comp.
    '''

    if not 0 <= alpha <= 1:
        raise ValueError(f'harmonisation strength must lie in [0, 1], not {alpha}')
    if levels < 1:
        raise ValueError(f'need at least one pyramid level, not {levels}')

    img = to_float_image(comp)
    m = np.asarray(text_mask, dtype=np.float64)
    if m.shape != img.shape[:2]:
        raise ShapeError(f'text mask {m.shape} does not match image {img.shape[:2]}')
    if not (m > 0).any():
        raise EmptyRegion('text mask is empty')

    y0, y1, x0, x1 = _window(m > 0, img.shape)
    crop = img[y0:y1, x0:x1].astype(np.float32)
    mcrop = m[y0:y1, x0:x1]
    if not (1.0 - mcrop).sum() > 0:
        raise EmptyRegion('text covers its whole local window; no background to match')

    bands = _laplacian_pyramid(crop, levels)
    out_bands = []
    for k, band in enumerate(bands):
        mk = cv2.resize(mcrop.astype(np.float32), (band.shape[1], band.shape[0]),
                        interpolation=cv2.INTER_AREA).astype(np.float64)
        if not (mk > 0).any() or not (1.0 - mk).sum() > 0:
            LOGGER.debug('pyramid level %d has an empty region, left as is', k)
            out_bands.append(band)
            continue
        out_bands.append(rain_foreground(band.astype(np.float64), mk).astype(np.float32))

    harmonized = _collapse(out_bands).astype(np.float64)

    out = img.copy()
    weight = (alpha * mcrop)[..., None] if img.ndim == 3 else alpha * mcrop
    region = out[y0:y1, x0:x1]
    blended = np.clip(region + weight * (harmonized - region), 0.0, 1.0)
    out[y0:y1, x0:x1] = np.where((mcrop > 0)[..., None] if img.ndim == 3 else mcrop > 0, blended, region)

    if np.asarray(comp).dtype == np.uint8:
        # untouched pixels round-trip exactly through k / 255
        return to_uint8_image(out)
    return out
