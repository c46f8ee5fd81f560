'''
This module renders plain text patches: a word drawn horizontally
and centred on a 256x256 canvas from a registered font file, plus the
post-processing effects (shadow, blur, emboss, texture). It also
holds the asset stores (fonts, lexicon, textures) and the random
choice of what to render.
'''

# pylint: disable=relative-beyond-top-level

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import cv2
import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy import ndimage

from .core import PATCH_SIZE, TextPatch
from .errors import ConfigError, GlyphError, TextOverflowError
from .utils import LUMA_WEIGHTS, to_float_image, to_uint8_image

LOGGER = logging.getLogger(__name__)

MIN_SIZE_PX = 8
MAX_INK_FRACTION = 0.8
FONT_SUFFIXES = ('.ttf', '.otf', '.ttc')
TEXTURE_SUFFIXES = ('.png', '.jpg', '.jpeg')

# A private-use code point, unmapped in ordinary fonts, so it draws the notdef box
_NOTDEF_PROBE = '\ue000'


@dataclass(frozen=True)
class Shadow:
    offset: tuple = (3, 3)
    opacity: float = 0.5

    def __post_init__(self):
        dx, dy = self.offset
        if int(dx) != dx or int(dy) != dy or max(abs(dx), abs(dy)) > 6:
            raise ValueError(f'shadow offset must be whole pixels within 6, got {self.offset}')
        if not 0 <= self.opacity <= 0.6:
            raise ValueError(f'shadow opacity must lie in [0, 0.6], not {self.opacity}')


@dataclass(frozen=True)
class Blur:
    sigma: float = 1.0

    def __post_init__(self):
        if not 0 < self.sigma <= 1.5:
            raise ValueError(f'blur sigma must lie in (0, 1.5], not {self.sigma}')


@dataclass(frozen=True)
class Emboss:
    depth: float = 1.0

    def __post_init__(self):
        if not 0 < self.depth <= 2:
            raise ValueError(f'emboss depth must lie in (0, 2], not {self.depth}')


@dataclass(frozen=True)
class Texture:
    texture_id: str
    opacity: float = 0.2

    def __post_init__(self):
        if not 0 <= self.opacity <= 0.3:
            raise ValueError(f'texture opacity must lie in [0, 0.3], not {self.opacity}')


@dataclass(frozen=True)
class RenderSpec:

    '''
    What to render: text, font id, fill colour (8-bit RGB), nominal
    size in pixels and a tuple of effects.
    '''

    text: str
    font_id: str
    fill: tuple = (255, 255, 255)
    size_px: int = 64
    effects: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.size_px < MIN_SIZE_PX:
            raise ValueError(f'size_px must be at least {MIN_SIZE_PX}, not {self.size_px}')
        if len(self.fill) != 3 or not all(0 <= c <= 255 for c in self.fill):
            raise ValueError(f'fill must be an 8-bit RGB triple, not {self.fill}')


class FontStore:

    '''
    This class is a read-only registry of font files keyed by font
    id (the file stem). Only registered files are ever opened, so
    rendering never falls back to system fonts.
    '''

    def __init__(self, paths):

        self.__paths = {}
        for p in paths:
            p = Path(p)
            if p.stem in self.__paths:
                raise ConfigError(f'duplicate font id {p.stem!r}')
            self.__paths[p.stem] = p
        self.__cache = {}

    def __repr__(self):
        return 'FontStore({} fonts)'.format(len(self.__paths))

    def __len__(self):
        return len(self.__paths)

    @classmethod
    def from_dir(cls, directory):
        '''Registers every font file found in a directory (sorted by name)'''
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f'font directory {directory} does not exist')
        return cls(sorted(p for p in directory.iterdir() if p.suffix.lower() in FONT_SUFFIXES))

    @property
    def ids(self):
        return sorted(self.__paths)

    def path(self, font_id):
        try:
            return self.__paths[font_id]
        except KeyError as err:
            raise ConfigError(f'unknown font id {font_id!r}') from err

    def get(self, font_id, size):
        '''FreeType font at a pixel size, with the basic (unshaped) layout engine'''
        key = (font_id, int(size))
        if key not in self.__cache:
            self.__cache[key] = ImageFont.truetype(str(self.path(font_id)), int(size),
                                                   layout_engine=ImageFont.Layout.BASIC)
        return self.__cache[key]


class TextureStore:

    '''
    Read-only registry of texture images (float RGB in [0, 1]) keyed
    by file stem.
    '''

    def __init__(self, textures=None):
        self.__textures = dict(textures or {})

    def __repr__(self):
        return 'TextureStore({} textures)'.format(len(self.__textures))

    def __len__(self):
        return len(self.__textures)

    @classmethod
    def from_dir(cls, directory):
        directory = Path(directory)
        textures = {}
        if directory.is_dir():
            for p in sorted(directory.iterdir()):
                if p.suffix.lower() not in TEXTURE_SUFFIXES:
                    continue
                img = cv2.imread(str(p), cv2.IMREAD_COLOR)
                if img is None:
                    LOGGER.warning('cannot decode texture %s, skipped', p)
                    continue
                textures[p.stem] = to_float_image(cv2.cvtColor(img, cv2.COLOR_BGR2RGB))
        return cls(textures)

    @property
    def ids(self):
        return sorted(self.__textures)

    def get(self, texture_id):
        try:
            return self.__textures[texture_id]
        except KeyError as err:
            raise ConfigError(f'unknown texture id {texture_id!r}') from err


def load_lexicon(path):
    '''Reads a UTF-8 lexicon, one token per line; blank lines are skipped'''
    with open(path, encoding='utf-8-sig') as f:
        return [line.strip() for line in f if line.strip()]


@dataclass(frozen=True)
class Assets:

    '''
    Everything the renderer draws from: fonts, lexicon and textures.
    '''

    fonts: FontStore
    lexicon: tuple
    textures: TextureStore = field(default_factory=TextureStore)

    @classmethod
    def from_root(cls, root=None):

        '''
        Loads fonts/, lexicon.txt and textures/ from an asset root
        (default: the TEXTSYNTH_ASSETS environment variable).
        '''

        root = root or os.environ.get('TEXTSYNTH_ASSETS')
        if not root:
            raise ConfigError('no asset root given and TEXTSYNTH_ASSETS is not set')
        root = Path(root)
        lexicon_path = root / 'lexicon.txt'
        if not lexicon_path.is_file():
            raise ConfigError(f'lexicon {lexicon_path} does not exist')
        return cls(FontStore.from_dir(root / 'fonts'), tuple(load_lexicon(lexicon_path)),
                   TextureStore.from_dir(root / 'textures'))


def _glyph_bitmap(font, ch):
    left, top, right, bottom = font.getbbox(ch)
    if right <= left or bottom <= top:
        return np.zeros((0, 0), dtype=np.uint8)
    img = Image.new('L', (right - left, bottom - top), 0)
    ImageDraw.Draw(img).text((-left, -top), ch, font=font, fill=255)
    return np.asarray(img)


def check_glyphs(font, text):

    '''
    Raises GlyphError if any visible character of text has no glyph
    in the font (it draws nothing, or draws the notdef box).
    '''

    notdef = _glyph_bitmap(font, _NOTDEF_PROBE)
    for ch in sorted(set(text)):
        if ch.isspace():
            continue
        bitmap = _glyph_bitmap(font, ch)
        if not bitmap.any():
            raise GlyphError(f'character {ch!r} renders no ink')
        if bitmap.shape == notdef.shape and np.array_equal(bitmap, notdef):
            raise GlyphError(f'character {ch!r} is not in the font')


def _ink_box(alpha):
    box = np.zeros(alpha.shape, dtype=bool)
    ys, xs = np.nonzero(alpha > 0)
    if xs.size:
        box[ys.min():ys.max() + 1, xs.min():xs.max() + 1] = True
    return box


def render_patch(spec: RenderSpec, fonts: FontStore):

    '''
    Rasterises spec.text horizontally, centred on a 256x256 patch.
    The font size starts at spec.size_px and shrinks until the ink
    box fits in 80% of the patch. The fill colour covers the whole
    RGB channel; alpha is the rasteriser coverage and the bbox mask
    the ink box. Effects are not applied here.
    '''

    # Standard data type input checks
    assert isinstance(spec, RenderSpec)
    assert isinstance(fonts, FontStore)

    if not spec.text or not spec.text.strip():
        raise ValueError('cannot render an empty text')

    limit = MAX_INK_FRACTION * PATCH_SIZE
    size = int(spec.size_px)
    font = fonts.get(spec.font_id, size)
    check_glyphs(font, spec.text)

    while True:
        left, top, right, bottom = font.getbbox(spec.text)
        w, h = right - left, bottom - top
        if w <= limit and h <= limit:
            break
        smaller = min(size - 1, int(size * limit / max(w, h)))
        if smaller < MIN_SIZE_PX:
            raise TextOverflowError(f'{spec.text!r} does not fit a {PATCH_SIZE}px patch at size {MIN_SIZE_PX}')
        size = smaller
        font = fonts.get(spec.font_id, size)

    canvas = Image.new('L', (PATCH_SIZE, PATCH_SIZE), 0)
    origin = (int(round((PATCH_SIZE - w) / 2.0 - left)), int(round((PATCH_SIZE - h) / 2.0 - top)))
    ImageDraw.Draw(canvas).text(origin, spec.text, font=font, fill=255)

    alpha = np.asarray(canvas, dtype=np.float64) / 255.0
    if not (alpha > 0).any():
        raise GlyphError(f'{spec.text!r} renders no ink in font {spec.font_id!r}')

    rgb = np.empty((PATCH_SIZE, PATCH_SIZE, 3), dtype=np.uint8)
    rgb[...] = np.asarray(spec.fill, dtype=np.uint8)
    LOGGER.debug('rendered %r in %s at %dpx', spec.text, spec.font_id, size)
    return TextPatch(rgb, alpha, _ink_box(alpha), spec.text)


def _shift(a, dy, dx):
    return ndimage.shift(a, (dy, dx), order=1, mode='constant', cval=0.0)


def _apply_texture(rgb, alpha, effect, textures, rng):
    tex = textures.get(effect.texture_id)[..., :3]
    reps = (int(np.ceil(PATCH_SIZE / tex.shape[0])) + 1, int(np.ceil(PATCH_SIZE / tex.shape[1])) + 1, 1)
    tiled = np.tile(tex, reps)
    oy, ox = rng.integers(tex.shape[0]), rng.integers(tex.shape[1])
    tiled = tiled[oy:oy + PATCH_SIZE, ox:ox + PATCH_SIZE]
    return rgb * (1.0 - effect.opacity + effect.opacity * tiled), alpha


def _apply_emboss(rgb, alpha, effect):
    # lit from the top-left: edges facing it brighten, the far edges darken
    d = effect.depth
    relief = _shift(alpha, -d, -d) - _shift(alpha, d, d)
    return np.clip(rgb + 0.35 * (relief * alpha)[..., None], 0.0, 1.0), alpha


def _apply_shadow(rgb, alpha, effect):
    dx, dy = effect.offset
    shade = effect.opacity * ndimage.shift(alpha, (dy, dx), order=0, mode='constant', cval=0.0)
    new_alpha = alpha + shade * (1.0 - alpha)
    with np.errstate(divide='ignore', invalid='ignore'):
        # black shadow under the text; colours are stored un-premultiplied
        new_rgb = np.where((new_alpha > 0)[..., None], rgb * (alpha / new_alpha)[..., None], rgb)
    return new_rgb, new_alpha


def _apply_blur(rgb, alpha, effect):
    blurred = np.stack([ndimage.gaussian_filter(rgb[..., c], effect.sigma, mode='nearest') for c in range(3)],
                       axis=-1)
    return blurred, ndimage.gaussian_filter(alpha, effect.sigma, mode='constant', cval=0.0)


def apply_effects(patch: TextPatch, effects, rng, textures: Optional[TextureStore] = None):

    '''
    Applies effects to a patch in a fixed order (texture, emboss,
    shadow, blur) and recomputes the bbox mask as the box of the new
    alpha support. Alpha below 1/255 is dropped.
    '''

    effects = tuple(effects)
    if not effects:
        return patch

    rgb = to_float_image(patch.rgb)
    alpha = np.array(patch.alpha, dtype=np.float64)

    for effect in sorted(effects, key=lambda e: _EFFECT_ORDER.index(type(e))):
        if isinstance(effect, Texture):
            rgb, alpha = _apply_texture(rgb, alpha, effect, textures or TextureStore(), rng)
        elif isinstance(effect, Emboss):
            rgb, alpha = _apply_emboss(rgb, alpha, effect)
        elif isinstance(effect, Shadow):
            rgb, alpha = _apply_shadow(rgb, alpha, effect)
        elif isinstance(effect, Blur):
            rgb, alpha = _apply_blur(rgb, alpha, effect)

    alpha = np.clip(alpha, 0.0, 1.0)
    alpha[alpha < 1.0 / 255.0] = 0.0
    return TextPatch(to_uint8_image(np.clip(rgb, 0.0, 1.0)), alpha, _ink_box(alpha), patch.text, patch.rect)


_EFFECT_ORDER = (Texture, Emboss, Shadow, Blur)


def contrast_palette(rng, min_contrast=0.3):

    '''
    Uniform 8-bit RGB colour whose luma is at least min_contrast away
    from mid-gray.
    '''

    while True:
        rgb = rng.integers(0, 256, size=3)
        if abs(float(rgb @ LUMA_WEIGHTS) / 255.0 - 0.5) >= min_contrast:
            return tuple(int(c) for c in rgb)


def sample_effects(rng, textures: Optional[TextureStore] = None, p=0.25):

    '''
    Draws each effect independently with probability p, parameters
    uniform within their allowed ranges. Texture needs at least one
    registered texture.
    '''

    out = []
    if rng.random() < p:
        out.append(Shadow(offset=(int(rng.integers(1, 7)), int(rng.integers(1, 7))),
                          opacity=float(rng.uniform(0.2, 0.6))))
    if rng.random() < p:
        out.append(Blur(sigma=float(rng.uniform(0.3, 1.5))))
    if rng.random() < p:
        out.append(Emboss(depth=float(rng.uniform(0.5, 2.0))))
    if rng.random() < p and textures is not None and len(textures):
        ids = textures.ids
        out.append(Texture(texture_id=ids[int(rng.integers(len(ids)))], opacity=float(rng.uniform(0.1, 0.3))))
    return tuple(out)


def sample_spec(lexicon, fonts, rng, palette_policy=None, textures=None, size_range=(24, 96), effect_prob=0.25):

    '''
    Random RenderSpec: a uniform word from the lexicon, a uniform
    font, a colour from palette_policy (default contrast_palette), a
    size and a random set of effects. Every draw comes from rng, so
    a seeded generator gives the same spec every time.
    '''

    if not isinstance(rng, np.random.Generator):
        raise TypeError(f'sample_spec needs a numpy Generator, not {type(rng).__name__}')

    lexicon = list(lexicon)
    font_ids = fonts.ids if isinstance(fonts, FontStore) else list(fonts)
    if not lexicon:
        raise ConfigError('lexicon is empty')
    if not font_ids:
        raise ConfigError('no fonts registered')

    palette_policy = palette_policy or contrast_palette

    text = lexicon[int(rng.integers(len(lexicon)))]
    font_id = font_ids[int(rng.integers(len(font_ids)))]
    fill = palette_policy(rng)
    size = int(rng.integers(size_range[0], size_range[1] + 1))
    effects = sample_effects(rng, textures, effect_prob)
    return RenderSpec(text=text, font_id=font_id, fill=fill, size_px=size, effects=effects)
