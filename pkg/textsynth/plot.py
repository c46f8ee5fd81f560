"""
This module provides graphing functionality
for inspecting heatmap stages, text patches and
synthesized images.
"""

# pylint: disable=relative-beyond-top-level

import numpy as np
from matplotlib import pyplot as plt

from .core import SceneRecord, SynthRecord, TextPatch


def _finish(fig, path):
    # save to a file if asked, else show interactively
    fig.tight_layout()
    if path is not None:
        fig.savefig(path, dpi=100)
        plt.close(fig)
    else:
        plt.show()
    return fig


def _draw_quad(ax, quad, color):
    pts = np.vstack([quad.points, quad.points[:1]])
    ax.plot(pts[:, 0], pts[:, 1], color=color, linewidth=1)


def plot_heatmap_stages(rec: SceneRecord, stages: dict, path=None):

    '''
    Plots the erased image of a record with its valid quads next to
    the heatmap stages (any of 'ha', 'he', 'ht', 'hf' present in
    stages).

    Inputs:

    rec, the record the heatmaps were generated from (a SceneRecord);
    stages, the maps (a dict mapping stage name to Heatmap);
    path, where to save the figure (shown on screen if None).
    '''

    # Standard data type input checks
    assert isinstance(rec, SceneRecord)
    assert isinstance(stages, dict)

    names = [n for n in ('ha', 'he', 'ht', 'hf') if n in stages]
    titles = {'ha': 'consistency', 'he': 'edge segmented', 'ht': 'thresholded', 'hf': 'final'}

    fig, axs = plt.subplots(1, len(names) + 1, figsize=(3 * (len(names) + 1), 3))
    axs = np.atleast_1d(axs)

    axs[0].imshow(rec.erased)
    for inst in rec.instances:
        _draw_quad(axs[0], inst.quad, 'lime' if inst.valid else 'red')
    axs[0].set_title(rec.record_id or 'erased')

    for ax, name in zip(axs[1:], names):
        ax.imshow(stages[name].values, cmap='inferno', vmin=0, vmax=1)
        ax.set_title(titles[name])

    for ax in axs:
        ax.axis('off')
    return _finish(fig, path)


def plot_patch(patch: TextPatch, path=None):

    '''
    Plots the RGB, alpha and bbox-mask channels of a text patch.
    '''

    # Standard data type input checks
    assert isinstance(patch, TextPatch)

    fig, axs = plt.subplots(1, 3, figsize=(9, 3))
    axs[0].imshow(patch.rgb)
    axs[0].set_title(repr(patch.text))
    axs[1].imshow(patch.alpha, cmap='gray', vmin=0, vmax=1)
    axs[1].set_title('alpha')
    axs[2].imshow(patch.bbox_mask, cmap='gray')
    axs[2].set_title('bbox')
    for ax in axs:
        ax.axis('off')
    return _finish(fig, path)


def plot_synth_record(rec: SynthRecord, path=None):

    '''
    Plots a synthesized image with its placed quads and texts.
    '''

    # Standard data type input checks
    assert isinstance(rec, SynthRecord)

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(rec.image)
    for inst in rec.instances:
        _draw_quad(ax, inst.quad, 'yellow')
        x, y = inst.quad.points[0]
        ax.text(x, y - 2, inst.text, color='yellow', fontsize=8)
    ax.set_title('{} ({} texts)'.format(rec.record_id, len(rec.instances)))
    ax.axis('off')
    return _finish(fig, path)
