'''
This module provides the domain types shared by the rest of the
package (quadrilateral boxes, masks, heatmaps, homographies, text
patches and the two record types) and the validation of scene
records. There are no algorithms here beyond validation.

Coordinates: origin at the top-left pixel centre, x to the right,
y downwards; pixel (i, j) of an array sits at x = j, y = i.
Images are 8-bit RGB (H, W, 3) arrays on the outside of the package
and float arrays in [0, 1] inside the numerical modules.
'''

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import ShapeError, SingularTransform
from .utils import polygon_area, quad_mask

# Text patches are always this size (pixels, square)
PATCH_SIZE = 256

# How far (px) stroke pixels may stray outside their quad
MASK_TOLERANCE_PX = 3


def _frozen(arr, dtype=None):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def _segments_intersect(a, b, c, d):
    def orient(p, q, r):
        return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    return (orient(a, b, c) * orient(a, b, d) <= 0) and (orient(c, d, a) * orient(c, d, b) <= 0)


class QuadBox:

    '''
    This class represents a quadrilateral bounding box: four (x, y)
    corners p0..p3, clockwise from the top-left corner in reading
    order.
    '''

    def __init__(self, points):

        pts = np.asarray(points, dtype=np.float64)
        if pts.size != 8:
            raise ShapeError(f'a QuadBox needs exactly four (x, y) points, got shape {pts.shape}')
        self.__points = _frozen(pts.reshape(4, 2))

    def __repr__(self):
        corners = ', '.join('({:.2f}, {:.2f})'.format(x, y) for x, y in self.__points)
        return 'QuadBox([{}])'.format(corners)

    def __eq__(self, other):
        return isinstance(other, QuadBox) and np.array_equal(self.__points, other.points)

    def __hash__(self):
        return hash(self.__points.tobytes())

    @classmethod
    def from_bounds(cls, x0, y0, x1, y1):
        '''Axis-aligned box from its extreme coordinates'''
        return cls([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    @classmethod
    def square(cls, cx, cy, side):
        '''Axis-aligned square of the given side centred on (cx, cy)'''
        r = side / 2.0
        return cls.from_bounds(cx - r, cy - r, cx + r, cy + r)

    @property
    def points(self):
        return self.__points

    @property
    def centroid(self):
        return tuple(self.__points.mean(axis=0))

    @property
    def width(self):
        '''Mean length of the top and bottom edges'''
        p = self.__points
        return 0.5 * (np.linalg.norm(p[1] - p[0]) + np.linalg.norm(p[2] - p[3]))

    @property
    def height(self):
        '''Mean length of the left and right edges'''
        p = self.__points
        return 0.5 * (np.linalg.norm(p[3] - p[0]) + np.linalg.norm(p[2] - p[1]))

    @property
    def area(self):
        '''Signed area; positive for clockwise corners'''
        return polygon_area(self.__points)

    @property
    def bounds(self):
        '''(x_min, y_min, x_max, y_max)'''
        p = self.__points
        return (p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max())

    def is_simple(self):
        p = self.__points
        return not (_segments_intersect(p[0], p[1], p[2], p[3])
                    or _segments_intersect(p[1], p[2], p[3], p[0]))

    def is_degenerate(self, tol=1e-9):

        '''
        Returns True if the quad has (near) zero area or any three
        corners are collinear.
        '''

        p = self.__points
        if not np.all(np.isfinite(p)):
            return True
        for i in range(4):
            a, b, c = p[i], p[(i + 1) % 4], p[(i + 2) % 4]
            if abs(polygon_area([a, b, c])) <= tol:
                return True
        return False

    def violations(self):

        '''
        Returns a list of strings naming every broken invariant
        (empty when the quad is well formed).
        '''

        out = []
        if not np.all(np.isfinite(self.__points)):
            out.append('non-finite coordinate')
            return out
        if self.area <= 0:
            out.append('non-positive area')
        if not self.is_simple():
            out.append('self-intersecting polygon')
        return out

    def mask(self, shape):
        '''Bool map of the pixel centres inside the quad'''
        return quad_mask(self.__points, shape)

    def within(self, shape):
        '''True if every corner lies inside an image of the given (H, W) shape'''
        h, w = shape[:2]
        x0, y0, x1, y1 = self.bounds
        return x0 >= 0 and y0 >= 0 and x1 <= w - 1 and y1 <= h - 1

    def to_list(self):
        return [float(v) for v in self.__points.reshape(-1)]


class StrokeMask:

    '''
    This class represents the stroke-level mask of one text
    instance: a binary map with the dimensions of its image.
    '''

    def __init__(self, bitmap, instance_id=0):

        bitmap = np.asarray(bitmap)
        if bitmap.ndim != 2:
            raise ShapeError(f'a StrokeMask must be 2-D, got shape {bitmap.shape}')
        self.__bitmap = _frozen(bitmap > 0)
        self.__instance_id = int(instance_id)

    def __repr__(self):
        return 'StrokeMask(id={}, shape={}, area={})'.format(self.__instance_id, self.shape, self.area)

    @property
    def bitmap(self):
        return self.__bitmap

    @property
    def instance_id(self):
        return self.__instance_id

    @property
    def shape(self):
        return self.__bitmap.shape

    @property
    def area(self):
        return int(self.__bitmap.sum())

    def is_empty(self):
        return not self.__bitmap.any()


class Heatmap:

    '''
    This class represents a single-channel float map over the pixels
    of an image. Normalised stages live in [0, 1]; the raw appearance
    distance map may hold +inf sentinels.
    '''

    def __init__(self, values):

        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f'a Heatmap must be 2-D, got shape {values.shape}')
        self.__values = _frozen(values)

    def __repr__(self):
        v = self.__values
        finite = v[np.isfinite(v)]
        lo, hi = (finite.min(), finite.max()) if finite.size else (np.nan, np.nan)
        return 'Heatmap(shape={}, min={:.4f}, max={:.4f})'.format(v.shape, lo, hi)

    @property
    def values(self):
        return self.__values

    @property
    def shape(self):
        return self.__values.shape

    def support(self):
        return self.__values > 0

    def is_binary(self):
        return bool(np.all((self.__values == 0) | (self.__values == 1)))

    def violations(self, normalized=True):
        out = []
        v = self.__values
        if normalized:
            if not np.all(np.isfinite(v)):
                out.append('non-finite value')
            elif v.min() < 0 or v.max() > 1:
                out.append('value outside [0, 1]')
        elif np.any(np.isnan(v)) or np.any(v < 0):
            out.append('negative or NaN distance')
        return out


class Homography:

    '''
    This class represents a 3x3 projective transform. The matrix is
    renormalised on construction so that m[2][2] == 1, and must be
    invertible.
    '''

    def __init__(self, m):

        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ShapeError(f'a Homography needs a 3x3 matrix, got shape {m.shape}')
        if not np.all(np.isfinite(m)) or abs(m[2, 2]) < 1e-12:
            raise SingularTransform('matrix cannot be normalised so that m[2][2] = 1')
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-9:
            raise SingularTransform(f'|det| = {abs(np.linalg.det(m)):.3g} <= 1e-9')
        self.__m = _frozen(m)

    def __repr__(self):
        return 'Homography(\n{})'.format(np.array2string(self.__m, precision=6, suppress_small=True))

    def __matmul__(self, other):
        return Homography(self.__m @ other.matrix)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx, ty):
        return cls([[1, 0, tx], [0, 1, ty], [0, 0, 1]])

    @classmethod
    def scaling(cls, sx, sy=None, tx=0.0, ty=0.0):
        sy = sx if sy is None else sy
        return cls([[sx, 0, tx], [0, sy, ty], [0, 0, 1]])

    @property
    def matrix(self):
        return self.__m

    def inverse(self):
        return Homography(np.linalg.inv(self.__m))

    def apply(self, points):

        '''
        Maps an (N, 2) array of (x, y) points; returns an (N, 2)
        array.
        '''

        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        q = np.hstack([p, np.ones((len(p), 1))]) @ self.__m.T
        return q[:, :2] / q[:, 2:3]

    def apply_quad(self, quad):
        return QuadBox(self.apply(quad.points))

    def free_params(self):
        '''The 8 free parameters (m[2][2] excluded)'''
        return self.__m.reshape(-1)[:8].copy()

    def allclose(self, other, atol=1e-6):
        return bool(np.allclose(self.__m, other.matrix, atol=atol, rtol=0))


class TextPatch:

    '''
    This class represents a 256x256 five-channel plain text patch:
    RGB, pixel alpha and a BBox-level mask, plus the text and the
    reference rectangle it is meant for (None until assigned).
    '''

    def __init__(self, rgb, alpha, bbox_mask, text, rect=None):

        rgb = np.asarray(rgb)
        alpha = np.asarray(alpha, dtype=np.float64)
        bbox_mask = np.asarray(bbox_mask) > 0

        size = (PATCH_SIZE, PATCH_SIZE)
        if rgb.shape != size + (3,) or alpha.shape != size or bbox_mask.shape != size:
            raise ShapeError(f'patch channels must be {PATCH_SIZE}x{PATCH_SIZE}, got '
                             f'{rgb.shape}, {alpha.shape}, {bbox_mask.shape}')
        if np.any((alpha > 0) & ~bbox_mask):
            raise ValueError('alpha support must lie inside the bbox mask')

        self.__rgb = _frozen(rgb, dtype=np.uint8)
        self.__alpha = _frozen(np.clip(alpha, 0.0, 1.0))
        self.__bbox_mask = _frozen(bbox_mask)
        self.__text = text
        self.__rect = rect

    def __repr__(self):
        return 'TextPatch(text={!r}, ink={:.1f}, rect={})'.format(self.__text, self.__alpha.sum(), self.__rect)

    @property
    def rgb(self):
        return self.__rgb

    @property
    def alpha(self):
        return self.__alpha

    @property
    def bbox_mask(self):
        return self.__bbox_mask

    @property
    def text(self):
        return self.__text

    @property
    def rect(self):
        return self.__rect

    def with_rect(self, rect):
        return TextPatch(self.__rgb, self.__alpha, self.__bbox_mask, self.__text, rect)

    def bbox(self):

        '''
        Pixel-area box of the bbox mask as (x0, y0, x1, y1) edge
        coordinates (pixel centres +- 0.5), or None if the mask is
        empty.
        '''

        ys, xs = np.nonzero(self.__bbox_mask)
        if xs.size == 0:
            return None
        return (xs.min() - 0.5, ys.min() - 0.5, xs.max() + 0.5, ys.max() + 0.5)


@dataclass(frozen=True)
class SceneInstance:

    '''
    One annotated text instance of a scene record.
    '''

    quad: QuadBox
    mask: StrokeMask
    valid: bool
    text: Optional[str] = None


class SceneRecord:

    '''
    This class represents one DecompST quadruplet: the original
    scene-text image, its text-erased counterpart and the annotated
    instances (quad, stroke mask, validity, transcript). Invalid
    instances are kept with valid=False.
    '''

    def __init__(self, original, erased, instances, record_id='', source=''):

        self.__original = _frozen(original)
        self.__erased = _frozen(erased)
        self.__instances = tuple(instances)
        self.__record_id = record_id
        self.__source = source

    def __repr__(self):
        d = "Scene record:     {}\n".format(self.__record_id)
        d += "   source:        {}\n".format(self.__source)
        d += "   image size:    {}\n".format(self.__original.shape[:2])
        d += "   instances:     {}\n".format(len(self.__instances))
        d += "   valid:         {}".format(len(self.valid_indices()))
        return d

    @property
    def original(self):
        return self.__original

    @property
    def erased(self):
        return self.__erased

    @property
    def instances(self):
        return self.__instances

    @property
    def record_id(self):
        return self.__record_id

    @property
    def source(self):
        return self.__source

    @property
    def shape(self):
        return self.__original.shape[:2]

    def valid_indices(self):
        return [k for k, inst in enumerate(self.__instances) if inst.valid]


@dataclass(frozen=True)
class SynthInstance:

    '''
    One placed text instance of a synthesized image.
    '''

    quad: QuadBox
    mask: StrokeMask
    text: str


class SynthRecord:

    '''
    This class represents one synthesized training sample: the
    composite image, the placed instances, the seed it was generated
    from and the background it was generated on. `empty` flags a
    record on which no instance could be placed.
    '''

    def __init__(self, image, instances, seed, provenance, record_id='', empty=None):

        self.__image = _frozen(image, dtype=np.uint8)
        self.__instances = tuple(instances)
        self.__seed = int(seed)
        self.__provenance = provenance
        self.__record_id = record_id
        self.__empty = (len(self.__instances) == 0) if empty is None else bool(empty)

    def __repr__(self):
        d = "Synth record:     {}\n".format(self.__record_id)
        d += "   background:    {}\n".format(self.__provenance)
        d += "   seed:          {}\n".format(self.__seed)
        d += "   image size:    {}\n".format(self.__image.shape[:2])
        d += "   texts:         {}".format([i.text for i in self.__instances])
        return d

    @property
    def image(self):
        return self.__image

    @property
    def instances(self):
        return self.__instances

    @property
    def seed(self):
        return self.__seed

    @property
    def provenance(self):
        return self.__provenance

    @property
    def record_id(self):
        return self.__record_id

    @property
    def empty(self):
        return self.__empty


@dataclass(frozen=True)
class Violation:

    '''
    A broken invariant of a record: the field it concerns, the
    instance index (None for record-level fields) and a message.
    '''

    field: str
    instance: Optional[int]
    message: str

    def __str__(self):
        where = self.field if self.instance is None else '{}[{}]'.format(self.field, self.instance)
        return '{}: {}'.format(where, self.message)


def validate_scene_record(rec):

    '''
    Returns a list of Violation objects, one per broken invariant of
    the record (empty iff the record is well formed). Never raises
    for bad data and never modifies the record.
    '''

    # Standard data type input checks
    assert isinstance(rec, SceneRecord)

    out = []
    original, erased = rec.original, rec.erased

    if original.ndim != 3 or original.shape[2] != 3:
        out.append(Violation('original', None, f'expected an RGB image, got shape {original.shape}'))
    if erased.shape != original.shape:
        out.append(Violation('erased', None,
                             f'dimension mismatch: {erased.shape[:2]} vs original {original.shape[:2]}'))

    shape = original.shape[:2]
    tolerance = np.ones((2 * MASK_TOLERANCE_PX + 1,) * 2, dtype=bool)

    for k, inst in enumerate(rec.instances):
        for message in inst.quad.violations():
            out.append(Violation('quad', k, message))

        mask = inst.mask
        if mask.shape != shape:
            out.append(Violation('mask', k, f'dimension mismatch: {mask.shape} vs image {shape}'))
            continue

        if mask.is_empty():
            if inst.valid:
                out.append(Violation('mask', k, 'empty mask on a valid instance'))
            continue

        # Stroke pixels must stay within the quad grown by the tolerance
        if not inst.quad.violations():
            allowed = ndimage.binary_dilation(inst.quad.mask(shape), structure=tolerance)
            stray = int(np.count_nonzero(mask.bitmap & ~allowed))
            if stray:
                out.append(Violation('mask', k, f'{stray} stroke pixels outside the quad'))

    return out


def inconsistent_scene_records(records):

    '''
    Returns a list of (record, violations) pairs for the records
    that break at least one invariant, based on
    validate_scene_record.
    '''

    # Standard data type input checks
    assert all([isinstance(r, SceneRecord) for r in records])

    pairs = [(r, validate_scene_record(r)) for r in records]
    return [(r, v) for r, v in pairs if v]
