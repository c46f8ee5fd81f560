'''
Unit tests for the plot module.
'''

# pylint: disable=import-error

import import_helper  # noqa
import synthetic

import matplotlib
matplotlib.use('Agg')

import numpy as np  # noqa: E402

from textsynth.core import Heatmap, PATCH_SIZE, QuadBox, StrokeMask, SynthInstance, SynthRecord, TextPatch  # noqa: E402
from textsynth.plot import plot_heatmap_stages, plot_patch, plot_synth_record  # noqa: E402


def test_plot_heatmap_stages(tmp_path):

    rec = synthetic.scene_record(valid=[True, False])
    ones = Heatmap(np.ones(rec.shape))

    # should run without exception, with any subset of the stages
    plot_heatmap_stages(rec, {'ha': ones, 'hf': ones}, path=tmp_path / 'stages.png')
    plot_heatmap_stages(rec, {}, path=tmp_path / 'none.png')
    assert (tmp_path / 'stages.png').stat().st_size > 0
    assert (tmp_path / 'none.png').is_file()


def test_plot_patch(tmp_path):

    alpha = np.zeros((PATCH_SIZE, PATCH_SIZE))
    alpha[100:150, 30:220] = 1.0
    patch = TextPatch(np.full((PATCH_SIZE, PATCH_SIZE, 3), 200, dtype=np.uint8), alpha, alpha > 0, 'text')
    plot_patch(patch, path=tmp_path / 'patch.png')
    assert (tmp_path / 'patch.png').is_file()


def test_plot_synth_record(tmp_path):

    image = synthetic.textured_background((64, 80))
    bitmap = synthetic.stroke_bitmap((64, 80), (10, 10, 30, 30))
    inst = SynthInstance(quad=QuadBox.from_bounds(9, 9, 30, 30), mask=StrokeMask(bitmap, 0), text='H')
    plot_synth_record(SynthRecord(image, [inst], 1, {}, record_id='bg'), path=tmp_path / 'synth.png')
    plot_synth_record(SynthRecord(image, [], 1, {}, record_id='empty', empty=True), path=tmp_path / 'empty.png')
    assert (tmp_path / 'synth.png').is_file() and (tmp_path / 'empty.png').is_file()
