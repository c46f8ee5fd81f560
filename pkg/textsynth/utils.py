# Copyright (C) 2018 Garth N. Wells
#
# SPDX-License-Identifier: MIT

'''
This module contains utility functions shared by the rest of the
package: sorting helpers, image dtype conversion, luma, seed
derivation and polygon rasterisation.
'''

import hashlib

import numpy as np

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def sorted_by_key(x, i, reverse=False):

    '''
    Sorts a sequence of tuples on their ith entry only (the other
    entries, e.g. patches or arrays, are never compared). The sort
    is stable, so ties keep their input order, e.g.

      > sorted_by_key([(64, 0, p0), (96, 1, p1), (64, 2, p2)], 0, reverse=True)
      >>> [(96, 1, p1), (64, 0, p0), (64, 2, p2)]
    '''

    return sorted(x, key=lambda element: element[i], reverse=reverse)


def to_float_image(img):

    '''
    Returns an image as float64 in [0, 1]. 8-bit images are divided
    by 255, float images are copied unchanged.
    '''

    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    return img.astype(np.float64)


def to_uint8_image(img):

    '''
    Returns a float image in [0, 1] as 8-bit, rounding to nearest.
    8-bit input is returned as a copy.
    '''

    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.copy()
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def luma(img):

    '''
    Grayscale of an RGB image (float [0, 1] or 8-bit) using the
    BT.601 weights. Returns a float map in [0, 1].
    '''

    return to_float_image(img)[..., :3] @ LUMA_WEIGHTS


def derive_seed(seed: int, *keys):

    '''
    Derives a 64-bit seed from a base seed and any number of keys
    (record ids, instance indices, ...). The result depends only on
    the values, never on call order or process, so parallel workers
    draw the same numbers as a serial run.
    '''

    h = hashlib.sha256(repr((int(seed),) + tuple(str(k) for k in keys)).encode('utf-8'))
    return int.from_bytes(h.digest()[:8], 'little')


def polygon_area(points):

    '''
    Signed shoelace area of a polygon given as an (N, 2) array of
    (x, y) points. Clockwise polygons in image coordinates (y down)
    have positive area.
    '''

    p = np.asarray(points, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def quad_mask(points, shape):

    '''
    Rasterises a polygon: returns a bool map of the given (H, W)
    shape that is True at every pixel centre lying inside the
    polygon or on its boundary.
    '''

    h, w = shape[:2]
    pts = np.asarray(points, dtype=np.float64)
    mask = np.zeros((h, w), dtype=bool)

    x0 = max(int(np.floor(pts[:, 0].min())), 0)
    x1 = min(int(np.ceil(pts[:, 0].max())), w - 1)
    y0 = max(int(np.floor(pts[:, 1].min())), 0)
    y1 = min(int(np.ceil(pts[:, 1].max())), h - 1)
    if x0 > x1 or y0 > y1:
        return mask

    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    inside = np.zeros(xs.shape, dtype=bool)
    on_edge = np.zeros(xs.shape, dtype=bool)

    n = len(pts)
    for i in range(n):
        xa, ya = pts[i]
        xb, yb = pts[(i + 1) % n]

        # even-odd crossing test on a horizontal ray to the right
        crosses = (ya > ys) != (yb > ys)
        with np.errstate(divide='ignore', invalid='ignore'):
            x_cross = xa + (ys - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (xs < x_cross)

        # pixel centres exactly on the edge count as inside
        dx, dy = xb - xa, yb - ya
        seg = dx * dx + dy * dy
        if seg > 0:
            t = np.clip(((xs - xa) * dx + (ys - ya) * dy) / seg, 0.0, 1.0)
        else:
            t = np.zeros_like(xs)
        on_edge |= (xs - (xa + t * dx)) ** 2 + (ys - (ya + t * dy)) ** 2 <= 1e-12

    mask[y0:y1 + 1, x0:x1 + 1] = inside | on_edge
    return mask
