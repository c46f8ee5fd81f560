'''
Unit tests for the config module.
'''

# pylint: disable=import-error

import import_helper  # noqa

import logging

import pytest
import yaml

from textsynth.config import RunConfig, default_sections, load_config, setup_logging
from textsynth.errors import ConfigError
from textsynth.heatmap import HeatmapParams
from textsynth.pipeline import ColorBackend, GeometryBackend, LocationBackend, PipelineConfig


def test_defaults():

    cfg = load_config()
    assert cfg.config_path is None
    assert cfg.heatmap_params() == HeatmapParams()
    assert cfg.pipeline_config() == PipelineConfig()
    backends = cfg.backend_set()
    assert backends.location is LocationBackend.PLAINNESS
    assert backends.geometry is GeometryBackend.RULE_BASED
    assert backends.color is ColorBackend.RAIN

    sections = default_sections()
    assert 'seed' not in sections['pipeline'] and 'seed' not in sections['jitter']
    assert sections['pipeline']['texts_per_image'] == [1, 8]
    assert sections['backends']['location'] == 'plainness'


def test_precedence(tmp_path):

    path = tmp_path / 'run.yaml'
    path.write_text(yaml.safe_dump({'seed': 7, 'pipeline': {'image_size': 512, 'texts_per_image': [2, 4]},
                                    'heatmap': {'threshold': 0.3}}), encoding='utf-8')

    # Test 1: file over defaults
    cfg = load_config(path)
    assert cfg.seed == 7 and cfg.config_path == str(path)
    assert cfg.pipeline_config().image_size == 512
    assert cfg.pipeline_config().texts_per_image == (2, 4)
    assert cfg.pipeline_config().seed == 7
    assert cfg.heatmap_params().threshold == 0.3
    assert cfg.jitter_params().seed == 7

    # Test 2: flags over the file
    cfg = load_config(path, {'seed': 9, 'pipeline': {'image_size': 256}, 'backends': {'color': 'passthrough'}})
    assert cfg.seed == 9
    assert cfg.pipeline_config().image_size == 256
    assert cfg.pipeline_config().texts_per_image == (2, 4)
    assert cfg.backend_set().color is ColorBackend.PASSTHROUGH

    # Test 3: a dumped configuration loads back to the same values
    out = tmp_path / 'echo.yaml'
    cfg.dump(out)
    again = load_config(out)
    assert again.pipeline == cfg.pipeline and again.seed == cfg.seed and again.backends == cfg.backends


def test_invalid(tmp_path):

    bad_files = {
        'unknown.yaml': 'pipeline:\n  image_sise: 512\n',
        'toplevel.yaml': 'colour: red\n',
        'list.yaml': '- 1\n- 2\n',
        'section.yaml': 'pipeline: 3\n',
        'syntax.yaml': 'pipeline: [1, 2\n',
        'range.yaml': 'pipeline:\n  overlap_required: 1.5\n',
        'backend.yaml': 'backends:\n  location: everywhere\n',
        'heatmapdir.yaml': 'backends:\n  location: heatmap-file\n',
    }
    for name, text in bad_files.items():
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config(path)

    with pytest.raises(ConfigError):
        load_config(tmp_path / 'missing.yaml')
    with pytest.raises(ConfigError):
        load_config(overrides={'workerz': 2})


def test_run_config_copy():

    cfg = RunConfig()
    d = cfg.to_dict()
    d['pipeline']['image_size'] = 1
    assert cfg.pipeline['image_size'] == 768


def test_setup_logging():

    assert setup_logging(-1) == logging.WARNING
    assert setup_logging(0) == logging.INFO
    assert setup_logging(2) == logging.DEBUG
    assert logging.getLogger().level == logging.DEBUG
