'''
This module provides the command-line entry point:

    textsynth gen-heatmap ROOT OUT       text-region heatmaps of a DecompST set
    textsynth preprocess ROOT OUT        training triplets of a DecompST set
    textsynth synth BACKGROUNDS OUT      synthesize images on backgrounds
    textsynth validate ROOT              check record invariants
    textsynth stats ROOT                 images / valid instances per source
    textsynth render-patch TEXT OUT      render one text patch

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 I/O error, 4 data validation error, 130 interrupted.
'''

# pylint: disable=relative-beyond-top-level

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from tqdm import tqdm

from . import datio, plot
from .config import RunConfig, load_config, setup_logging
from .core import validate_scene_record
from .errors import (AnnotationParseError, ConfigError, DatasetIOError, InvalidInstance, NoValidInstances,
                     TextSynthError)
from .heatmap import generate_gt_stages
from .pipeline import synthesize
from .preprocess import build_triplet
from .textrender import (Assets, FontStore, RenderSpec, TextureStore, apply_effects, render_patch,
                         sample_effects)
from .utils import derive_seed, to_uint8_image

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_INTERRUPTED = 130


def _overrides(args):
    # flags that were given on the command line, as a nested config dict
    out = {}
    if getattr(args, 'seed', None) is not None:
        out['seed'] = args.seed
    if getattr(args, 'workers', None) is not None:
        out['workers'] = args.workers
    out['verbosity'] = args.verbose - args.quiet
    if getattr(args, 'exact', False):
        out['heatmap'] = {'stride': 1, 'region_cap': None}
    pipeline = {}
    if getattr(args, 'texts', None) is not None:
        pipeline['texts_per_image'] = list(args.texts)
    if getattr(args, 'semantic', None) is not None:
        pipeline['semantic_masks'] = str(args.semantic)
    if pipeline:
        out['pipeline'] = pipeline
    backends = {k: getattr(args, k) for k in ('location', 'geometry', 'color') if getattr(args, k, None)}
    if getattr(args, 'heatmaps', None) is not None:
        backends['heatmap_dir'] = str(args.heatmaps)
    if backends:
        out['backends'] = backends
    return out


def _resolve(args):
    cfg = load_config(args.config, _overrides(args))
    setup_logging(cfg.verbosity)
    LOGGER.info('resolved config: %s', cfg.to_dict())
    return cfg


def _echo_config(cfg, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.dump(out_dir / 'run_config.yaml')


def _pool_map(fn, tasks, workers, desc):
    # ordered results; in-process when a single worker is asked for
    if workers <= 1:
        for task in tqdm(tasks, desc=desc, disable=None):
            yield fn(task)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from tqdm(pool.map(fn, tasks), total=len(tasks), desc=desc, disable=None)


def _heatmap_job(task):
    entry, cfg_dict, out_dir, preview = task
    params = RunConfig(**cfg_dict).heatmap_params()
    try:
        rec = datio.read_record(entry)
        stages = generate_gt_stages(rec, params)
    except NoValidInstances as err:
        return entry.record_id, 'skipped', str(err)
    except (DatasetIOError, AnnotationParseError) as err:
        return entry.record_id, 'error', str(err)
    datio.save_heatmap(Path(out_dir) / f'{entry.record_id}.png', stages['hf'], params.to_dict(), params.exact)
    if preview:
        plot.plot_heatmap_stages(rec, stages, path=Path(out_dir) / 'previews' / f'{entry.record_id}.png')
    return entry.record_id, 'ok', ''


def cmd_gen_heatmap(args):

    '''
    Writes the final text-region heatmap (PNG + JSON sidecar) of
    every record of a DecompST directory.
    '''

    cfg = _resolve(args)
    manifest = datio.scan_decompst(args.root, strict=args.strict)
    out = Path(args.out)
    _echo_config(cfg, out)
    if args.preview:
        (out / 'previews').mkdir(parents=True, exist_ok=True)

    tasks = [(entry, cfg.to_dict(), str(out), args.preview) for entry in manifest.records]
    failed = 0
    for record_id, status, message in _pool_map(_heatmap_job, tasks, cfg.workers, 'heatmaps'):
        if status == 'error':
            failed += 1
            LOGGER.warning('%s: %s', record_id, message)
            if args.strict:
                raise DatasetIOError(record_id, message)
        elif status == 'skipped':
            LOGGER.warning('%s skipped: %s', record_id, message)

    LOGGER.info('wrote %d heatmaps to %s', len(tasks) - failed, out)
    return EXIT_VALIDATION if failed and args.strict else EXIT_OK


def cmd_preprocess(args):

    '''
    Writes one training-triplet directory per valid instance (or
    only --record/--instance) plus a manifest of the seeds used.
    '''

    cfg = _resolve(args)
    jitter = cfg.jitter_params()
    pipeline = cfg.pipeline_config()
    out = Path(args.out)
    _echo_config(cfg, out)

    manifest = datio.scan_decompst(args.root, strict=args.strict)
    if args.record is not None:
        manifest.records = [e for e in manifest.records if e.record_id == args.record]
        if not manifest.records:
            raise DatasetIOError(args.record, 'no such record')

    written = []
    for rec in tqdm(datio.load_decompst(manifest, strict=args.strict), total=len(manifest), disable=None):
        indices = [args.instance] if args.instance is not None else rec.valid_indices()
        for k in indices:
            seed = derive_seed(jitter.seed, rec.record_id, k)
            triplet = build_triplet(rec, k, jitter, pipeline.rect_scale, rng=np.random.default_rng(seed))
            name = f'{rec.record_id}_{k}'
            datio.write_triplet(triplet, out / name, seed)
            written.append({'triplet': name, 'record_id': rec.record_id, 'instance': k, 'seed': str(seed)})

    datio.dump({'schema_version': datio.SCHEMA_VERSION, 'count': len(written), 'triplets': written},
               out / 'manifest.json')
    LOGGER.info('wrote %d triplets to %s', len(written), out)
    return EXIT_OK


_WORKER = {}


def _init_synth_worker(cfg_dict, asset_root):
    cfg = RunConfig(**cfg_dict)
    _WORKER['pipeline'] = cfg.pipeline_config()
    _WORKER['backends'] = cfg.backend_set()
    _WORKER['assets'] = Assets.from_root(asset_root)


def _synth_job(path):
    path = Path(path)
    config, backends = _WORKER['pipeline'], _WORKER['backends']
    background = datio.read_image(path, path.stem)
    semantic = None
    if config.semantic_masks:
        semantic_path = Path(config.semantic_masks) / f'{path.stem}.png'
        if semantic_path.is_file():
            semantic = datio.read_labels(semantic_path, path.stem)
    return synthesize(background, config, backends, _WORKER['assets'], record_id=path.stem, semantic=semantic)


def cmd_synth(args):

    '''
    Synthesizes one image per background and writes the records
    (images, masks, JSON and ICDAR annotations, manifest). With
    --resume, backgrounds already in the output manifest are skipped.
    '''

    cfg = _resolve(args)
    asset_root = args.assets or os.environ.get('TEXTSYNTH_ASSETS')
    if not asset_root:
        raise ConfigError('no asset root: pass --assets or set TEXTSYNTH_ASSETS')

    backgrounds = datio.iter_backgrounds(args.backgrounds, datio.read_exclusions(args.exclude))
    out = Path(args.out)
    _echo_config(cfg, out)
    writer = datio.SynthWriter(out, config=cfg.to_dict(), resume=args.resume)
    done = writer.completed_ids()
    todo = [str(p) for p in backgrounds if p.stem not in done]
    LOGGER.info('%d backgrounds, %d already done', len(backgrounds), len(backgrounds) - len(todo))

    tic = time.perf_counter()
    count = 0
    try:
        if cfg.workers <= 1:
            _init_synth_worker(cfg.to_dict(), asset_root)
            results = (_synth_job(p) for p in tqdm(todo, desc='synth', disable=None))
            for rec in results:
                LOGGER.info('%s: seed %d, %d texts', rec.record_id, rec.seed, len(rec.instances))
                writer.write(rec)
                count += 1
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_synth_worker,
                                     initargs=(cfg.to_dict(), asset_root)) as pool:
                for rec in tqdm(pool.map(_synth_job, todo), total=len(todo), desc='synth', disable=None):
                    LOGGER.info('%s: seed %d, %d texts', rec.record_id, rec.seed, len(rec.instances))
                    writer.write(rec)
                    count += 1
    finally:
        writer.flush()
        elapsed = time.perf_counter() - tic
        if count:
            LOGGER.info('%d images in %.1fs (%.2f images/s)', count, elapsed, count / max(elapsed, 1e-9))
    print('{} images written to {} ({:.2f} images/s)'.format(count, out, count / max(elapsed, 1e-9)))
    return EXIT_OK


def cmd_validate(args):

    '''
    Loads every record and reports its invariant violations. Exits
    with 4 if any record fails to load or breaks an invariant.
    '''

    _resolve(args)
    manifest = datio.scan_decompst(args.root, strict=args.strict)
    bad = 0
    for rec in datio.load_decompst(manifest, strict=args.strict):
        violations = validate_scene_record(rec)
        for v in violations:
            print('{}: {}'.format(rec.record_id, v))
        bad += bool(violations)
    for err in manifest.errors:
        print('error: {}'.format(err))

    print('{} records, {} with violations, {} unreadable'.format(len(manifest), bad, len(manifest.errors)))
    return EXIT_VALIDATION if bad or manifest.errors else EXIT_OK


def cmd_stats(args):
    '''Prints images and valid instances per source (optionally against the published counts)'''
    _resolve(args)
    manifest = datio.scan_decompst(args.root, strict=args.strict)
    table = datio.stats(manifest)
    print(datio.format_stats(table, datio.PUBLISHED_COUNTS if args.compare else None))
    return EXIT_VALIDATION if manifest.errors and args.strict else EXIT_OK


def cmd_render_patch(args):

    '''
    Renders one text patch (with optional effects drawn from --seed)
    and writes it as an RGBA PNG plus its bbox mask.
    '''

    cfg = _resolve(args)
    if args.font is not None and Path(args.font).is_file():
        fonts = FontStore([args.font])
        font_id = Path(args.font).stem
        textures = TextureStore()
    else:
        assets = Assets.from_root(args.assets)
        fonts, textures = assets.fonts, assets.textures
        font_id = args.font or fonts.ids[0]

    spec = RenderSpec(text=args.text, font_id=font_id, fill=tuple(args.fill), size_px=args.size)
    patch = render_patch(spec, fonts)
    if args.effects:
        rng = np.random.default_rng(derive_seed(cfg.seed, args.text))
        patch = apply_effects(patch, sample_effects(rng, textures, p=1.0), rng, textures)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    datio.write_rgba(out, patch.rgb, to_uint8_image(patch.alpha))
    datio.write_mask(out.with_name(out.stem + '_bbox.png'), patch.bbox_mask)
    if args.preview:
        plot.plot_patch(patch, path=out.with_name(out.stem + '_preview.png'))
    print('{} -> {}'.format(patch, out))
    return EXIT_OK


def build_parser():

    '''
    Returns the argparse parser of the textsynth command.
    '''

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='YAML config file (flags override it)')
    common.add_argument('--seed', type=int, help='base seed of the run')
    common.add_argument('--workers', type=int, help='worker processes')
    common.add_argument('-v', '--verbose', action='count', default=0, help='more logging')
    common.add_argument('-q', '--quiet', action='count', default=0, help='less logging')

    parser = argparse.ArgumentParser(prog='textsynth', description='Scene-text synthesis engine')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen-heatmap', parents=[common], help='text-region heatmaps of a DecompST set')
    p.add_argument('root', type=Path)
    p.add_argument('out', type=Path)
    p.add_argument('--exact', action='store_true', help='stride 1, no region subsampling')
    p.add_argument('--strict', action='store_true', help='stop at the first bad record')
    p.add_argument('--preview', action='store_true', help='also save stage previews')
    p.set_defaults(func=cmd_gen_heatmap)

    p = sub.add_parser('preprocess', parents=[common], help='training triplets of a DecompST set')
    p.add_argument('root', type=Path)
    p.add_argument('out', type=Path)
    p.add_argument('--record', help='only this record id')
    p.add_argument('--instance', type=int, help='only this instance index')
    p.add_argument('--strict', action='store_true')
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser('synth', parents=[common], help='synthesize text images on backgrounds')
    p.add_argument('backgrounds', type=Path)
    p.add_argument('out', type=Path)
    p.add_argument('--assets', type=Path, help='asset root (default: $TEXTSYNTH_ASSETS)')
    p.add_argument('--texts', type=int, nargs=2, metavar=('LO', 'HI'), help='texts per image')
    p.add_argument('--exclude', type=Path, help='file of background stems to skip')
    p.add_argument('--semantic', type=Path, help='directory of semantic label maps <stem>.png')
    p.add_argument('--heatmaps', type=Path, help='directory of heatmap PNGs (heatmap-file backend)')
    p.add_argument('--location', choices=['plainness', 'heatmap-file', 'uniform'])
    p.add_argument('--geometry', choices=['rule-based', 'identity', 'random'])
    p.add_argument('--color', choices=['rain', 'passthrough'])
    p.add_argument('--resume', action='store_true', help='skip backgrounds already written')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('validate', parents=[common], help='check record invariants')
    p.add_argument('root', type=Path)
    p.add_argument('--strict', action='store_true')
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('stats', parents=[common], help='images and valid instances per source')
    p.add_argument('root', type=Path)
    p.add_argument('--compare', action='store_true', help='show differences to the published counts')
    p.add_argument('--strict', action='store_true')
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('render-patch', parents=[common], help='render one text patch')
    p.add_argument('text')
    p.add_argument('out', type=Path)
    p.add_argument('--font', help='font file, or font id under the asset root')
    p.add_argument('--assets', type=Path)
    p.add_argument('--size', type=int, default=64)
    p.add_argument('--fill', type=int, nargs=3, default=[255, 255, 255], metavar=('R', 'G', 'B'))
    p.add_argument('--effects', action='store_true', help='apply one random draw of every effect')
    p.add_argument('--preview', action='store_true')
    p.set_defaults(func=cmd_render_patch)

    return parser


def main(argv=None):

    '''
    Runs the textsynth command and returns its exit code.
    '''

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        LOGGER.warning('interrupted')
        return EXIT_INTERRUPTED
    except ConfigError as err:
        print('configuration error: {}'.format(err), file=sys.stderr)
        return EXIT_CONFIG
    except (AnnotationParseError, InvalidInstance) as err:
        print('validation error: {}'.format(err), file=sys.stderr)
        return EXIT_VALIDATION
    except (DatasetIOError, OSError) as err:
        print('I/O error: {}'.format(err), file=sys.stderr)
        return EXIT_IO
    except TextSynthError as err:
        print('error: {}'.format(err), file=sys.stderr)
        return EXIT_ERROR
