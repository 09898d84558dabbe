# Copyright 2025 The DSKF Authors
#
# This file is part of DSKF.
#
# DSKF is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# DSKF is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with DSKF.  If not, see <http://www.gnu.org/licenses/>.

"""
Static SVG figures of evaluation results.

Figures are built on matplotlib.figure.Figure directly (no pyplot state), so they can be drawn from any thread. Output is byte-deterministic: the SVG id salt is fixed and no date is embedded.
"""

from __future__ import absolute_import, division

import os

import matplotlib
from matplotlib.figure import Figure
import numpy as np
from twisted.python import log


__all__ = []  # appended later


_SVG_METADATA = {'Date': None}

matplotlib.rcParams['svg.hashsalt'] = 'dskf'
matplotlib.rcParams['svg.fonttype'] = 'none'


def _save(figure, path):
    newname = path + '.new'
    figure.savefig(newname, format='svg', metadata=_SVG_METADATA)
    os.replace(newname, path)
    log.msg('Wrote %s' % (path,))


def _band(axes, x, ensemble_track, label, color):
    axes.fill_between(x, ensemble_track.q10, ensemble_track.q90, color=color, alpha=0.2, linewidth=0)
    axes.plot(x, ensemble_track.median, color=color, label=label)


def plot_tracks(path, times_ms, ensembles, truth=None, title=''):
    """
    Median ROI tracks with 10-90 % bands.

    ensembles: [(label, EnsembleTrack)]; truth: optional {label: curve}, drawn dashed after scaling to the median's maximum.
    """
    figure = Figure(figsize=(6, 3.5))
    axes = figure.add_subplot(1, 1, 1)
    colors = ['C0', 'C1', 'C2', 'C3']
    for (label, track), color in zip(ensembles, colors):
        _band(axes, times_ms, track, label, color)
        if truth is not None and np.any(truth[label] != 0):
            scale = np.max(track.median) / np.max(truth[label])
            axes.plot(times_ms, truth[label] * scale, color=color, linestyle='--', linewidth=0.8)
    axes.set_xlabel('time (ms)')
    axes.set_ylabel('mean |z| over ROI')
    axes.set_title(title)
    axes.legend(loc='upper right')
    figure.tight_layout()
    _save(figure, path)


__all__.append('plot_tracks')


def plot_xcorr(path, shifts_ms, ensembles, ideal=None, title=''):
    """Cross-correlation curves (median and 10-90 % band) against shift, optionally with the ideal curve."""
    figure = Figure(figsize=(6, 3.5))
    axes = figure.add_subplot(1, 1, 1)
    for (label, track), color in zip(ensembles, ['C0', 'C1', 'C2']):
        _band(axes, shifts_ms, track, label, color)
    if ideal is not None:
        axes.plot(shifts_ms, ideal, color='k', linestyle='--', label='ideal')
    axes.set_xlabel('shift (ms)')
    axes.set_ylabel('normalized cross-correlation')
    axes.set_ylim(-0.05, 1.05)
    axes.set_title(title)
    axes.legend(loc='upper right')
    figure.tight_layout()
    _save(figure, path)


__all__.append('plot_xcorr')


def plot_error_table(path, rows, methods, snrs):
    """Grouped bars of mean cross-correlation error per method and SNR, whiskers at the 10 and 90 % quantiles."""
    stats = {(method, snr, statistic): value for method, snr, statistic, value in rows}
    figure = Figure(figsize=(6, 3.5))
    axes = figure.add_subplot(1, 1, 1)
    width = 0.8 / max(1, len(snrs))
    for i, snr in enumerate(snrs):
        x, heights, low, high = [], [], [], []
        for j, method in enumerate(methods):
            if stats.get((method, snr, 'mean')) is None:
                continue
            mean = stats[(method, snr, 'mean')]
            x.append(j + (i - (len(snrs) - 1) / 2) * width)
            heights.append(mean)
            low.append(max(0.0, mean - stats[(method, snr, 'q10')]))
            high.append(max(0.0, stats[(method, snr, 'q90')] - mean))
        axes.bar(x, heights, width=width, yerr=[low, high], label='%g dB' % snr, capsize=2)
    axes.set_xticks(range(len(methods)))
    axes.set_xticklabels(methods)
    axes.set_ylabel('cross-correlation curve error')
    axes.legend(loc='upper right')
    figure.tight_layout()
    _save(figure, path)


__all__.append('plot_error_table')


def plot_peak_table(path, rows, methods, snrs):
    """Track height differences at both peaking moments, one panel per moment."""
    moments = sorted(set(row.moment for row in rows))
    figure = Figure(figsize=(6, 2.5 * max(1, len(moments))))
    width = 0.8 / max(1, len(snrs))
    for k, moment in enumerate(moments):
        axes = figure.add_subplot(len(moments), 1, k + 1)
        by_cell = {(row.method, row.snr_db): row for row in rows if row.moment == moment and row.value is not None}
        for i, snr in enumerate(snrs):
            cells = [(j, by_cell[(method, snr)]) for j, method in enumerate(methods) if (method, snr) in by_cell]
            axes.bar(
                [j + (i - (len(snrs) - 1) / 2) * width for j, _ in cells],
                [row.value for _, row in cells],
                width=width,
                label='%g dB' % snr)
        axes.axhline(0, color='k', linewidth=0.5)
        axes.set_xticks(range(len(methods)))
        axes.set_xticklabels(methods)
        axes.set_ylabel('height difference')
        axes.set_title(moment.replace('_', ' '))
        axes.legend(loc='upper right')
    figure.tight_layout()
    _save(figure, path)


__all__.append('plot_peak_table')
