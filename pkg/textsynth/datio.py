'''
This module provides dataset input and output: loading DecompST
records from disk, per-source statistics, and writing/reading
synthesized records, heatmaps and training triplets.

DecompST layout (one adapter, `_layout`, knows these names):

    <root>/images/<id>.<ext>     original scene-text image
    <root>/erased/<id>.<ext>     text-erased image
    <root>/masks/<id>_<k>.png    stroke mask of annotation line k
    <root>/annots/<id>.txt       one line per instance:
                                 x1,y1,...,x4,y4,text_label,erase_label,transcript
    <root>/sources.csv           optional "id,source" lines
'''

# pylint: disable=relative-beyond-top-level

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import cv2
import numpy as np
from PIL import Image

from .core import (Heatmap, Homography, QuadBox, SceneInstance, SceneRecord, StrokeMask, SynthInstance,
                   SynthRecord, TextPatch)
from .errors import AnnotationParseError, DatasetIOError
from .preprocess import TrainTriplet

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = 1
IMAGE_SUFFIXES = ('.jpg', '.jpeg', '.png', '.bmp')

# Images and valid text instances per source of the published release
PUBLISHED_COUNTS = {
    'IC15': {'images': 787, 'instances': 1848},
    'MLT19': {'images': 1681, 'instances': 6652},
    'SegText': {'images': 2117, 'instances': 7517},
    'Total': {'images': 4585, 'instances': 16017},
}

_SOURCE_ALIASES = {'ic15': 'IC15', 'icdar15': 'IC15', 'icdar2015': 'IC15', 'mlt19': 'MLT19', 'mlt': 'MLT19',
                   'mlt2019': 'MLT19', 'segtext': 'SegText', 'textseg': 'SegText'}


def dump(data, filename):
    """Save JSON object to file"""
    with open(filename, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=1, ensure_ascii=False)


def load(filename):
    """Load JSON object from file"""
    with open(filename, 'r', encoding='utf-8') as f:
        return json.load(f)


def read_image(path, record_id=''):
    '''Reads an image file as 8-bit RGB'''
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise DatasetIOError(record_id, f'cannot read image {path}')
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def write_image(path, rgb, record_id=''):
    '''Writes an 8-bit RGB image (format from the suffix)'''
    if not cv2.imwrite(str(path), cv2.cvtColor(np.asarray(rgb, dtype=np.uint8), cv2.COLOR_RGB2BGR)):
        raise DatasetIOError(record_id, f'cannot write image {path}')


def read_mask(path, record_id=''):
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert('L')) > 0
    except OSError as err:
        raise DatasetIOError(record_id, f'cannot read mask {path}: {err}') from err


def write_mask(path, bitmap, record_id=''):
    '''Writes a binary map as a 1-bit PNG'''
    try:
        Image.fromarray(np.asarray(bitmap, dtype=bool)).save(str(path), format='PNG')
    except OSError as err:
        raise DatasetIOError(record_id, f'cannot write mask {path}: {err}') from err


def read_labels(path, record_id=''):
    '''Reads a semantic label map (one integer label per pixel)'''
    labels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if labels is None:
        raise DatasetIOError(record_id, f'cannot read label map {path}')
    return labels if labels.ndim == 2 else labels[..., 0]


def write_rgba(path, rgb, alpha, record_id=''):
    '''Writes 8-bit RGB plus an 8-bit alpha channel as a PNG'''
    rgba = np.dstack([np.asarray(rgb, dtype=np.uint8), np.asarray(alpha, dtype=np.uint8)])
    try:
        Image.fromarray(rgba).save(str(path), format='PNG')
    except OSError as err:
        raise DatasetIOError(record_id, f'cannot write {path}: {err}') from err


def source_of(record_id, sources=None):

    '''
    Source dataset of a record: from the sources table if given,
    else the id prefix before the first '_' or '-', with the usual
    aliases mapped to IC15, MLT19 and SegText.
    '''

    if sources and record_id in sources:
        return sources[record_id]
    prefix = record_id.replace('-', '_').split('_')[0]
    return _SOURCE_ALIASES.get(prefix.lower(), prefix)


@dataclass
class RecordEntry:

    '''
    File references of one DecompST record.
    '''

    record_id: str
    original: Path
    erased: Path
    annotation: Path
    mask_dir: Path
    source: str

    def mask_path(self, k):
        return self.mask_dir / f'{self.record_id}_{k}.png'


@dataclass
class DatasetManifest:

    '''
    Index of a DecompST directory: the records found (ids unique, in
    sorted order) and the problems met while scanning or loading
    (lenient mode collects them here instead of raising).
    '''

    root: Path
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def counts_per_source(self):
        out = {}
        for entry in self.records:
            out[entry.source] = out.get(entry.source, 0) + 1
        return out


def _find(directory, stem):
    for suffix in IMAGE_SUFFIXES:
        p = directory / (stem + suffix)
        if p.is_file():
            return p
    return None


def _layout(root):
    return {'images': root / 'images', 'erased': root / 'erased', 'masks': root / 'masks',
            'annots': root / 'annots', 'sources': root / 'sources.csv'}


def _read_sources(path):
    if not path.is_file():
        return {}
    with open(path, encoding='utf-8-sig', newline='') as f:
        return {row[0].strip(): row[1].strip() for row in csv.reader(f) if len(row) >= 2}


def scan_decompst(root, strict=False):

    '''
    Builds the DatasetManifest of a DecompST directory. Records whose
    erased image or annotation file is missing raise DatasetIOError
    in strict mode and are skipped (and listed in errors) otherwise.
    '''

    root = Path(root)
    paths = _layout(root)
    if not paths['images'].is_dir():
        raise DatasetIOError('', f'{root} is not a DecompST root (no images/ directory)')

    sources = _read_sources(paths['sources'])
    manifest = DatasetManifest(root=root)
    for image in sorted(p for p in paths['images'].iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        record_id = image.stem
        erased = _find(paths['erased'], record_id)
        annotation = paths['annots'] / f'{record_id}.txt'
        problem = None
        if erased is None:
            problem = DatasetIOError(record_id, 'missing erased image')
        elif not annotation.is_file():
            problem = DatasetIOError(record_id, f'missing annotation {annotation}')
        if problem is not None:
            if strict:
                raise problem
            LOGGER.warning('%s', problem)
            manifest.errors.append(problem)
            continue
        manifest.records.append(RecordEntry(record_id, image, erased, annotation, paths['masks'],
                                            source_of(record_id, sources)))
    LOGGER.info('found %d DecompST records under %s', len(manifest), root)
    return manifest


@dataclass(frozen=True)
class AnnotationLine:
    quad: QuadBox
    text_label: int
    erase_label: int
    transcript: str

    @property
    def valid(self):
        return self.text_label == 1 and self.erase_label == 1


def parse_annotation(path):

    '''
    Parses a DecompST annotation file. Each non-blank line holds the
    eight quad coordinates, the text-pixel and erased-image quality
    labels (0 or 1) and the transcript (which may contain commas).
    '''

    out = []
    with open(path, encoding='utf-8-sig') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            parts = line.split(',', 10)
            if len(parts) < 10:
                raise AnnotationParseError(path, lineno, f'expected at least 10 fields, got {len(parts)}')
            try:
                coords = [float(v) for v in parts[:8]]
                labels = [int(parts[8]), int(parts[9])]
            except ValueError as err:
                raise AnnotationParseError(path, lineno, str(err)) from err
            if any(v not in (0, 1) for v in labels):
                raise AnnotationParseError(path, lineno, f'quality labels must be 0 or 1, got {labels}')
            out.append(AnnotationLine(QuadBox(coords), labels[0], labels[1], parts[10] if len(parts) > 10 else ''))
    return out


def read_record(entry: RecordEntry):

    '''
    Loads one SceneRecord from its file references.
    '''

    original = read_image(entry.original, entry.record_id)
    erased = read_image(entry.erased, entry.record_id)
    if erased.shape != original.shape:
        raise AnnotationParseError(entry.erased, None, f'dimension mismatch: erased {erased.shape[:2]} '
                                                       f'vs original {original.shape[:2]}')

    instances = []
    for k, line in enumerate(parse_annotation(entry.annotation)):
        mask_path = entry.mask_path(k)
        if mask_path.is_file():
            bitmap = read_mask(mask_path, entry.record_id)
        elif line.valid:
            raise DatasetIOError(entry.record_id, f'missing stroke mask {mask_path}')
        else:
            bitmap = np.zeros(original.shape[:2], dtype=bool)
        instances.append(SceneInstance(quad=line.quad, mask=StrokeMask(bitmap, k), valid=line.valid,
                                       text=line.transcript))
    return SceneRecord(original, erased, instances, record_id=entry.record_id, source=entry.source)


def load_decompst(root, strict=False):

    '''
    Yields the SceneRecords of a DecompST directory (a path or a
    DatasetManifest). In lenient mode records that fail to load are
    logged, added to the manifest errors and skipped; strict mode
    raises the first error.
    '''

    manifest = root if isinstance(root, DatasetManifest) else scan_decompst(root, strict)
    for entry in manifest.records:
        try:
            yield read_record(entry)
        except (DatasetIOError, AnnotationParseError) as err:
            if strict:
                raise
            LOGGER.warning('skipping %s: %s', entry.record_id, err)
            manifest.errors.append(err)


def stats(manifest: DatasetManifest):

    '''
    Returns {source: {'images': n, 'instances': m}} with a 'Total'
    row, counting valid instances from the annotation files.
    Unreadable annotations are skipped (and recorded in
    manifest.errors).
    '''

    table = {}
    for entry in manifest.records:
        try:
            valid = sum(1 for line in parse_annotation(entry.annotation) if line.valid)
        except (OSError, AnnotationParseError) as err:
            LOGGER.warning('cannot count %s: %s', entry.record_id, err)
            manifest.errors.append(err)
            continue
        row = table.setdefault(entry.source, {'images': 0, 'instances': 0})
        row['images'] += 1
        row['instances'] += valid

    table['Total'] = {'images': sum(r['images'] for r in table.values()),
                      'instances': sum(r['instances'] for r in table.values())}
    return table


def format_stats(table, compare=None):

    '''
    Renders a statistics table as text, one row per source (Total
    last). With compare (e.g. PUBLISHED_COUNTS) the differences are shown.
    '''

    names = sorted(k for k in table if k != 'Total') + ['Total']
    header = '{:<10} {:>8} {:>10}'.format('Source', 'Images', 'Instances')
    if compare is not None:
        header += ' {:>8} {:>10}'.format('dImages', 'dInst')
    lines = [header]
    for name in names:
        row = table[name]
        line = '{:<10} {:>8d} {:>10d}'.format(name, row['images'], row['instances'])
        if compare is not None:
            ref = compare.get(name, {'images': 0, 'instances': 0})
            line += ' {:>+8d} {:>+10d}'.format(row['images'] - ref['images'], row['instances'] - ref['instances'])
        lines.append(line)
    return '\n'.join(lines)


def write_icdar(path, quads, texts):

    '''
    Writes an ICDAR-2015 ground-truth file: one line per instance,
    eight integer coordinates (rounded) and the transcript.
    '''

    with open(path, 'w', encoding='utf-8', newline='') as f:
        for quad, text in zip(quads, texts):
            coords = ','.join(str(int(round(v))) for v in quad.to_list())
            f.write(f'{coords},{text}\r\n')


def read_icdar(path):

    '''
    Reads an ICDAR-2015 ground-truth file (BOM and CRLF tolerant).
    Returns a list of (QuadBox, transcript) pairs.
    '''

    out = []
    with open(path, encoding='utf-8-sig') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            parts = line.split(',', 8)
            if len(parts) < 8:
                raise AnnotationParseError(path, lineno, f'expected 8 coordinates, got {len(parts)} fields')
            try:
                quad = QuadBox([float(v) for v in parts[:8]])
            except ValueError as err:
                raise AnnotationParseError(path, lineno, str(err)) from err
            out.append((quad, parts[8] if len(parts) > 8 else ''))
    return out


class SynthWriter:

    '''
    This class writes synthesized records under an output root and
    keeps their manifest. Records are written one at a time by a
    single owner; the manifest is rewritten atomically on flush(), so
    an interrupted run leaves the list of completed records behind.

        <out>/images/<id>.png, <out>/masks/<id>_<k>.png,
        <out>/annots/<id>.json, <out>/icdar/gt_<id>.txt,
        <out>/manifest.json
    '''

    def __init__(self, out_root, formats=('json', 'icdar'), config=None, resume=False):

        self.__root = Path(out_root)
        self.__formats = tuple(formats)
        try:
            for sub in ('images', 'masks', 'annots', 'icdar'):
                (self.__root / sub).mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise DatasetIOError('', f'cannot create output directory {self.__root}: {err}') from err

        manifest_path = self.__root / 'manifest.json'
        self.__entries = {}
        if resume and manifest_path.is_file():
            for e in load(manifest_path)['records']:
                self.__entries[e['record_id']] = e
        self.__config = config

    def __repr__(self):
        return 'SynthWriter({}, {} records)'.format(self.__root, len(self.__entries))

    @property
    def root(self):
        return self.__root

    def completed_ids(self):
        return set(self.__entries)

    def write(self, rec: SynthRecord):

        '''
        Writes one record (image, masks, native JSON and/or ICDAR
        text) and adds it to the manifest.
        '''

        rid = rec.record_id
        write_image(self.__root / 'images' / f'{rid}.png', rec.image, rid)
        instances = []
        for k, inst in enumerate(rec.instances):
            rel = f'masks/{rid}_{k}.png'
            write_mask(self.__root / rel, inst.mask.bitmap, rid)
            instances.append({'quad': inst.quad.to_list(), 'text': inst.text, 'mask': rel})

        if 'json' in self.__formats:
            dump({'schema_version': SCHEMA_VERSION, 'record_id': rid, 'seed': str(rec.seed),
                  'provenance': rec.provenance, 'empty': rec.empty, 'image': f'images/{rid}.png',
                  'instances': instances}, self.__root / 'annots' / f'{rid}.json')
        if 'icdar' in self.__formats:
            write_icdar(self.__root / 'icdar' / f'gt_{rid}.txt', [i.quad for i in rec.instances],
                        [i.text for i in rec.instances])

        self.__entries[rid] = {'record_id': rid, 'seed': str(rec.seed), 'empty': rec.empty,
                               'instances': len(rec.instances)}

    def manifest(self):
        return {'schema_version': SCHEMA_VERSION, 'count': len(self.__entries),
                'config': self.__config, 'records': [self.__entries[k] for k in sorted(self.__entries)]}

    def flush(self):
        '''Writes manifest.json (via a temporary file and a rename)'''
        path = self.__root / 'manifest.json'
        tmp = path.with_suffix('.json.tmp')
        dump(self.manifest(), tmp)
        os.replace(tmp, path)
        return self.manifest()


def write_synth(records, out_root, formats=('json', 'icdar'), config=None, resume=False):

    '''
    Writes a stream of SynthRecords under out_root and returns the
    manifest (also written as manifest.json).
    '''

    writer = SynthWriter(out_root, formats, config, resume)
    try:
        for rec in records:
            writer.write(rec)
    finally:
        manifest = writer.flush()
    return manifest


def load_synth(out_root):

    '''
    Reads back the records written by write_synth (native JSON
    format), in manifest order.
    '''

    root = Path(out_root)
    manifest = load(root / 'manifest.json')
    for entry in manifest['records']:
        rid = entry['record_id']
        data = load(root / 'annots' / f'{rid}.json')
        if data.get('schema_version') != SCHEMA_VERSION:
            raise DatasetIOError(rid, f'unsupported schema version {data.get("schema_version")}')
        image = read_image(root / data['image'], rid)
        instances = [SynthInstance(quad=QuadBox(i['quad']), mask=StrokeMask(read_mask(root / i['mask'], rid), k),
                                   text=i['text'])
                     for k, i in enumerate(data['instances'])]
        yield SynthRecord(image, instances, int(data['seed']), data['provenance'], record_id=rid,
                          empty=data['empty'])


def _sidecar(path):
    return Path(path).with_suffix('.json')


def save_heatmap(path, heatmap: Heatmap, params=None, exact=False):

    '''
    Writes a heatmap with values in [0, 1] as a single-channel 8-bit
    PNG (round(255 v)) and a JSON sidecar with the parameters.
    '''

    values = np.clip(np.rint(heatmap.values * 255.0), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), values):
        raise DatasetIOError(Path(path).stem, f'cannot write heatmap {path}')
    dump({'schema_version': SCHEMA_VERSION, 'params': params, 'exact': bool(exact),
          'shape': list(heatmap.shape)}, _sidecar(path))


def load_heatmap(path):
    '''Reads a heatmap PNG; returns (Heatmap, sidecar dict or None)'''
    values = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if values is None:
        raise DatasetIOError(Path(path).stem, f'cannot read heatmap {path}')
    meta = load(_sidecar(path)) if _sidecar(path).is_file() else None
    return Heatmap(values.astype(np.float64) / 255.0), meta


def _write_png16(path, values):
    cv2.imwrite(str(path), np.clip(np.rint(np.asarray(values) * 65535.0), 0, 65535).astype(np.uint16))


def _read_png16(path):
    values = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if values is None:
        raise DatasetIOError(Path(path).parent.name, f'cannot read {path}')
    return values.astype(np.float64) / 65535.0


def write_triplet(triplet, out_dir, seed: Optional[int] = None):

    '''
    Writes a TrainTriplet to a directory: patch channels, background,
    source, ground-truth masks and a meta.json with the rectangle,
    the ground-truth matrix, the text and the seed.
    '''

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rid = out.name
    write_image(out / 'patch_rgb.png', triplet.patch.rgb, rid)
    _write_png16(out / 'patch_alpha.png', triplet.patch.alpha)
    write_mask(out / 'patch_bbox.png', triplet.patch.bbox_mask, rid)
    write_image(out / 'bg.png', triplet.bg, rid)
    write_image(out / 'source.png', triplet.source, rid)
    _write_png16(out / 'gt_alpha.png', triplet.gt_alpha)
    write_mask(out / 'gt_bm.png', triplet.gt_bm, rid)
    dump({'schema_version': SCHEMA_VERSION, 'rect': triplet.rect.to_list(),
          'gt_matrix': triplet.gt_matrix.matrix.tolist(), 'text': triplet.patch.text,
          'seed': None if seed is None else str(seed)}, out / 'meta.json')


def read_triplet(out_dir):
    '''Reads a directory written by write_triplet back into a TrainTriplet'''
    out = Path(out_dir)
    rid = out.name
    meta = load(out / 'meta.json')
    rect = QuadBox(meta['rect'])
    patch = TextPatch(read_image(out / 'patch_rgb.png', rid), _read_png16(out / 'patch_alpha.png'),
                      read_mask(out / 'patch_bbox.png', rid), meta['text'], rect)
    return TrainTriplet(patch=patch, rect=rect, bg=read_image(out / 'bg.png', rid),
                        gt_matrix=Homography(meta['gt_matrix']), gt_alpha=_read_png16(out / 'gt_alpha.png'),
                        source=read_image(out / 'source.png', rid), gt_bm=read_mask(out / 'gt_bm.png', rid))


def read_exclusions(path):
    '''File stems to leave out, one per line'''
    if path is None:
        return set()
    with open(path, encoding='utf-8-sig') as f:
        return {line.strip() for line in f if line.strip()}


def iter_backgrounds(directory, exclude=None):

    '''
    Sorted list of the background image files in a directory,
    without the stems listed in the exclusion set.
    '''

    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetIOError('', f'background directory {directory} does not exist')
    exclude = exclude or set()
    return [p for p in sorted(directory.iterdir())
            if p.suffix.lower() in IMAGE_SUFFIXES and p.stem not in exclude]
