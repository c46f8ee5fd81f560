'''
This module contains the run configuration of the command line:
built-in defaults, overridden by a YAML file, overridden by flags,
and the builders turning it into the parameter objects of the
numerical modules. It also sets up logging for a run.
'''

# pylint: disable=relative-beyond-top-level

import copy
import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError
from .heatmap import HeatmapParams
from .pipeline import Backends, ColorBackend, GeometryBackend, LocationBackend, PipelineConfig
from .preprocess import JitterParams

LOGGER = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _defaults(cls, exclude=()):
    return {f.name: _plain(getattr(cls(), f.name)) for f in dataclasses.fields(cls) if f.name not in exclude}


def _plain(value):
    # YAML friendly: tuples as lists, enums as their values
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


def default_sections():

    '''
    The built-in defaults of every configuration section, as plain
    dicts (what a YAML file may override).
    '''

    return {
        'heatmap': _defaults(HeatmapParams),
        'jitter': _defaults(JitterParams, exclude=('seed',)),
        'pipeline': _defaults(PipelineConfig, exclude=('seed', 'heatmap')),
        'backends': _defaults(Backends),
    }


@dataclass
class RunConfig:

    '''
    Fully resolved configuration of a command: one dict per section
    plus the run-wide seed, worker count and verbosity.
    '''

    heatmap: dict = field(default_factory=lambda: default_sections()['heatmap'])
    jitter: dict = field(default_factory=lambda: default_sections()['jitter'])
    pipeline: dict = field(default_factory=lambda: default_sections()['pipeline'])
    backends: dict = field(default_factory=lambda: default_sections()['backends'])
    seed: int = 0
    workers: int = 1
    verbosity: int = 0
    config_path: Optional[str] = None

    def to_dict(self):
        return copy.deepcopy(dataclasses.asdict(self))

    def dump(self, path):
        '''Writes the configuration as YAML (re-loadable with load_config)'''
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)

    def heatmap_params(self):
        d = dict(self.heatmap)
        d['weights'] = tuple(d['weights'])
        return _build(HeatmapParams, d, 'heatmap')

    def jitter_params(self):
        d = dict(self.jitter, seed=self.seed)
        d['aspect_range'] = tuple(d['aspect_range'])
        d['hsl_jitter'] = tuple(d['hsl_jitter'])
        return _build(JitterParams, d, 'jitter')

    def pipeline_config(self):
        d = dict(self.pipeline, seed=self.seed, heatmap=self.heatmap_params())
        d['texts_per_image'] = tuple(d['texts_per_image'])
        d['size_range'] = tuple(d['size_range'])
        return _build(PipelineConfig, d, 'pipeline')

    def backend_set(self):
        d = dict(self.backends)
        try:
            d['location'] = LocationBackend(d['location'])
            d['geometry'] = GeometryBackend(d['geometry'])
            d['color'] = ColorBackend(d['color'])
        except ValueError as err:
            raise ConfigError(f'backends: {err}') from err
        return _build(Backends, d, 'backends')


def _build(cls, values, section):
    try:
        return cls(**values)
    except TypeError as err:
        raise ConfigError(f'{section}: {err}') from err


def _merge(base, overrides, where='config'):
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if key not in out:
            raise ConfigError(f'unknown key {key!r} in {where}')
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f'{where}.{key} must be a mapping')
            out[key] = _merge(out[key], value, f'{where}.{key}')
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=None):

    '''
    Resolves a RunConfig: defaults, then the YAML file at path (if
    any), then overrides (a nested dict, typically from command-line
    flags). Unknown keys raise ConfigError.
    '''

    resolved = RunConfig().to_dict()
    if path is not None:
        path = Path(path)
        try:
            with open(path, encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except OSError as err:
            raise ConfigError(f'cannot read config file {path}: {err}') from err
        except yaml.YAMLError as err:
            raise ConfigError(f'invalid YAML in {path}: {err}') from err
        if not isinstance(data, dict):
            raise ConfigError(f'{path} must hold a mapping at the top level')
        data.pop('config_path', None)
        resolved = _merge(resolved, data, str(path))
        resolved['config_path'] = str(path)
    if overrides:
        resolved = _merge(resolved, overrides, 'flags')

    cfg = RunConfig(**resolved)
    # validate every section now rather than in a worker
    cfg.heatmap_params()
    cfg.jitter_params()
    cfg.pipeline_config()
    cfg.backend_set()
    return cfg


def setup_logging(verbosity=0):

    '''
    Configures the root logger once for a command-line run:
    verbosity < 0 WARNING, 0 INFO, > 0 DEBUG.
    '''

    level = logging.WARNING if verbosity < 0 else logging.DEBUG if verbosity > 0 else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.captureWarnings(True)
    return level
