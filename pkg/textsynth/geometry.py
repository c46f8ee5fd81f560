'''
This module contains the projective geometry of text placement:
four-point homographies, their composition, output-driven bilinear
sampling, alpha compositing and the construction of the square
reference rectangle (Rect) and of the ground-truth fine transform.
'''

# pylint: disable=relative-beyond-top-level

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import PATCH_SIZE, Homography, QuadBox
from .errors import DegenerateQuad, ShapeError, SingularTransform

LOGGER = logging.getLogger(__name__)

DEFAULT_RECT_SCALE = 1.4


@dataclass(frozen=True)
class SampleGrid:

    '''
    Source coordinates for every output pixel: an (H, W, 2) array
    of (x, y). Pixels with no defined source (beyond the horizon of
    the transform) hold NaN.
    '''

    coords: np.ndarray

    @property
    def shape(self):
        return self.coords.shape[:2]

    def out_of_bounds(self, src_shape):
        '''Bool map of output pixels whose source lies outside an image of src_shape'''
        h, w = src_shape[:2]
        x, y = self.coords[..., 0], self.coords[..., 1]
        with np.errstate(invalid='ignore'):
            inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
        return ~inside


def _normalising_transform(points):
    # Hartley normalisation: centroid to the origin, mean distance sqrt(2)
    c = points.mean(axis=0)
    d = np.mean(np.linalg.norm(points - c, axis=1))
    s = np.sqrt(2) / d if d > 0 else 1.0
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])


def quad_to_homography(src: QuadBox, dst: QuadBox):

    '''
    Returns the Homography mapping the four corners of src onto the
    four corners of dst, solved exactly from the 8x8 direct linear
    transform system (with Hartley normalisation).
    '''

    # Standard data type input checks
    assert isinstance(src, QuadBox) and isinstance(dst, QuadBox)

    if src.is_degenerate() or dst.is_degenerate():
        raise DegenerateQuad('cannot fit a homography to a quad with collinear corners')

    ts, td = _normalising_transform(src.points), _normalising_transform(dst.points)
    ps = np.hstack([src.points, np.ones((4, 1))]) @ ts.T
    pd = np.hstack([dst.points, np.ones((4, 1))]) @ td.T

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = ps[i, :2]
        u, v = pd[i, :2]
        a[2 * i] = [x, y, 1, 0, 0, 0, -x * u, -y * u]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -x * v, -y * v]
        b[2 * i], b[2 * i + 1] = u, v

    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as err:
        raise DegenerateQuad(f'singular DLT system: {err}') from err

    hn = np.append(h, 1.0).reshape(3, 3)
    result = Homography(np.linalg.inv(td) @ hn @ ts)

    residual = np.abs(result.apply(src.points) - dst.points).max()
    if residual > 1e-6:
        LOGGER.debug('homography corner residual %.3g px', residual)
    return result


def compose(a_m: Homography, a_n: Homography):

    '''
    Returns the composition A_m A_n (apply a_n first, then a_m),
    renormalised so that m[2][2] == 1.
    '''

    # Standard data type input checks
    assert isinstance(a_m, Homography) and isinstance(a_n, Homography)

    product = a_m.matrix @ a_n.matrix
    try:
        return Homography(product)
    except SingularTransform as err:
        raise SingularTransform(f'composed transform is singular: {err}') from err


def sample_grid(h: Homography, out_dims, roi=None):

    '''
    Builds the SampleGrid of a forward transform h (source ->
    output): every output pixel (restricted to roi = (x0, y0, x1, y1)
    inclusive, if given) is mapped back through h^-1.
    '''

    out_h, out_w = out_dims[:2]
    coords = np.full((out_h, out_w, 2), np.nan)
    x0, y0, x1, y1 = (0, 0, out_w - 1, out_h - 1) if roi is None else roi
    if x0 > x1 or y0 > y1:
        return SampleGrid(coords)

    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    m = h.inverse().matrix
    w = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    with np.errstate(divide='ignore', invalid='ignore'):
        sx = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / w
        sy = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / w
    behind = w <= 1e-12
    sx[behind] = np.nan
    sy[behind] = np.nan

    coords[y0:y1 + 1, x0:x1 + 1, 0] = sx
    coords[y0:y1 + 1, x0:x1 + 1, 1] = sy
    return SampleGrid(coords)


def warp_sample(image, h: Homography, out_dims, roi=None):

    '''
    Warps a (H, W) or (H, W, C) float image by the forward transform
    h into an array of out_dims. Each output pixel is the bilinear
    interpolation of the four source pixels around h^-1 of its
    position; samples outside the source give 0 in every channel.
    '''

    image = np.asarray(image, dtype=np.float64)
    grid = sample_grid(h, out_dims, roi)

    # NaN coordinates (undefined source) are sent far outside the input
    coords = np.nan_to_num(grid.coords, nan=-1e6)
    sample_at = np.stack([coords[..., 1], coords[..., 0]])

    if image.ndim == 2:
        return ndimage.map_coordinates(image, sample_at, order=1, mode='constant', cval=0.0)

    channels = [ndimage.map_coordinates(image[..., c], sample_at, order=1, mode='constant', cval=0.0)
                for c in range(image.shape[2])]
    return np.stack(channels, axis=-1)


def compose_over(text_rgb, alpha, background):

    '''
    Alpha-composites a text layer over a background:
    I_comp = I_ttRGB * I_ttA + I_bg * (1 - I_ttA), per channel.
    All inputs are float arrays; alpha is (H, W) in [0, 1].
    '''

    text_rgb = np.asarray(text_rgb, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)

    if text_rgb.shape != background.shape or alpha.shape != background.shape[:2]:
        raise ShapeError(f'cannot composite {text_rgb.shape} with alpha {alpha.shape} '
                         f'over {background.shape}')

    a = alpha[..., None] if background.ndim == 3 else alpha
    return text_rgb * a + background * (1.0 - a)


def make_rect(quad: QuadBox, scale: float = DEFAULT_RECT_SCALE):

    '''
    Returns the reference rectangle Rect of a text instance: an
    axis-aligned square centred on the quad centroid whose side is
    scale times the larger bounding extent of the quad. Rect may
    extend past the image; cropping pads with zeros.
    '''

    if not scale > 1:
        raise ValueError(f'Rect scale must be greater than 1, not {scale}')
    if quad.is_degenerate():
        raise DegenerateQuad(f'cannot build Rect around degenerate {quad}')

    x0, y0, x1, y1 = quad.bounds
    side = scale * max(x1 - x0, y1 - y0)
    cx, cy = quad.centroid
    return QuadBox.square(cx, cy, side)


def rect_similarity(rect: QuadBox, patch_size: int = PATCH_SIZE):

    '''
    Returns A_m: the scale + translation mapping the patch frame
    [0, patch_size]^2 onto the square Rect (x -> x0 + k x with
    k = side / patch_size).
    '''

    x0, y0, x1, _ = rect.bounds
    k = (x1 - x0) / patch_size
    return Homography.scaling(k, k, x0, y0)


def crop_to_patch(image, rect: QuadBox, patch_size: int = PATCH_SIZE):

    '''
    Crops Rect out of an image and resizes it to patch_size x
    patch_size by sampling through the inverse of rect_similarity.
    Parts of Rect outside the image come out as zeros (padding).
    '''

    a_m = rect_similarity(rect, patch_size)
    return warp_sample(image, a_m.inverse(), (patch_size, patch_size))


def rectified_quad(quad: QuadBox):

    '''
    Returns the axis-aligned rectangle a quad is rectified to: same
    centroid, width and height equal to the mean lengths of the
    quad's opposite edges.
    '''

    if quad.is_degenerate():
        raise DegenerateQuad(f'cannot rectify degenerate {quad}')

    cx, cy = quad.centroid
    w, h = quad.width, quad.height
    return QuadBox.from_bounds(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def gt_matrix(p_pt_quad: QuadBox, p_before_quad: QuadBox):

    '''
    Returns the ground truth of the fine transform A_n: the
    homography mapping the processed (horizontal) quad in P_pt onto
    the original quad in P_before, both in patch coordinates.
    '''

    return quad_to_homography(p_pt_quad, p_before_quad)


def quad_roi(quad: QuadBox, shape, margin=2):

    '''
    Inclusive pixel box (x0, y0, x1, y1) around a quad, grown by
    margin and clipped to an image of the given shape.
    '''

    h, w = shape[:2]
    bx0, by0, bx1, by1 = quad.bounds
    x0 = max(int(np.floor(bx0)) - margin, 0)
    y0 = max(int(np.floor(by0)) - margin, 0)
    x1 = min(int(np.ceil(bx1)) + margin, w - 1)
    y1 = min(int(np.ceil(by1)) + margin, h - 1)
    return (x0, y0, x1, y1)
