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
Tracking metrics: ROI strength tracks, ensemble statistics, normalized cross-correlation, the cross-correlation curve error and peak-height differences.

All functions are pure; they may be called concurrently from grid workers.
"""

from __future__ import absolute_import, division

from collections import namedtuple

import numpy as np

from dskf.config import ConfigException
from dskf.errors import DegenerateInputException, ShapeException
from dskf.simulate import gaussian_pulse


__all__ = []  # appended later


QUANTILE_METHOD = 'linear'

__all__.append('QUANTILE_METHOD')


Track = namedtuple('Track', [
    'values',  # length-T ROI-averaged |z|
    'roi_label',
    'method_label',
    'snr_db',
    'realization',
])

__all__.append('Track')


EnsembleTrack = namedtuple('EnsembleTrack', [
    'median',
    'q10',
    'q25',
    'q75',
    'q90',
    'mean',
    'count',
    'quantile_method',
])

__all__.append('EnsembleTrack')


def _activity_array(states, n=None):
    """Accept a T x k array, or a sequence of FilterFrame / SmoothedState; return the z array."""
    if isinstance(states, np.ndarray):
        z = states
    else:
        z = np.array([getattr(frame, 'z', frame) for frame in states], dtype=np.float64)
    if z.ndim != 2:
        raise ShapeException('expected a T x n sequence of standardized states, got shape %r' % (z.shape,))
    return z if n is None else z[:, :n]


def roi_track(states, roi, n=None, roi_label='', method_label='', snr_db=None, realization=None):
    """
    Mean |z_t[j]| over j in roi, per step.

    states: T x k array or sequence of frames; n limits it to the activity block when the states are the full kinematic state.
    """
    roi = list(roi)
    if not roi:
        raise ConfigException('ROI %r is empty' % (roi_label,))
    z = _activity_array(states, n)
    if min(roi) < 0 or max(roi) >= z.shape[1]:
        raise ConfigException('ROI %r has indices outside [0, %d)' % (roi_label, z.shape[1]))
    values = np.mean(np.abs(z[:, roi]), axis=1)
    return Track(values=values, roi_label=roi_label, method_label=method_label, snr_db=snr_db, realization=realization)


__all__.append('roi_track')


def _values(track):
    return np.asarray(getattr(track, 'values', track), dtype=np.float64)


def xcorr_normalized(f, g):
    """
    Normalized cross-correlation sum_n f[n] g[n+s] / (|f| |g|) for s = -(T-1) .. T-1, zero-padded; length 2T-1.
    """
    f = _values(f)
    g = _values(g)
    if f.shape != g.shape or f.ndim != 1:
        raise ShapeException('cross-correlation needs two series of equal length, got %r and %r' % (f.shape, g.shape))
    norm = np.linalg.norm(f) * np.linalg.norm(g)
    if not norm > 0:
        raise DegenerateInputException('cross-correlation of a zero series is undefined')
    return np.correlate(g, f, mode='full') / norm


__all__.append('xcorr_normalized')


def xcorr_shifts(length):
    """Shift (in steps) of each entry of a cross-correlation curve of two length-T series."""
    return np.arange(-(length - 1), length)


__all__.append('xcorr_shifts')


def xcorr_error(thal_curve, somato_curve, ideal_curve):
    """
    L2 distance of the estimated-vs-true cross-correlation curves from the ideal curve, both tracks pooled.

    thal_curve may be None when the scenario has no deep source; only the cortical term is then counted.
    """
    ideal = np.asarray(ideal_curve, dtype=np.float64)
    total = 0.0
    for curve in (thal_curve, somato_curve):
        if curve is None:
            continue
        curve = np.asarray(curve, dtype=np.float64)
        if curve.shape != ideal.shape:
            raise ShapeException('cross-correlation curve of length %d does not match ideal length %d' % (len(curve), len(ideal)))
        total += float(np.sum(np.square(curve - ideal)))
    return total ** 0.5


__all__.append('xcorr_error')


def ideal_curve(scenario):
    """
    Autocorrelation of the configured pulse sampled on the filter grid, with the pulse centred in the window.

    This is the curve a perfect track would produce against the true track.
    """
    if not scenario.sources:
        raise ConfigException('scenario has no sources')
    spec = scenario.sources[-1]
    centred = spec._replace(t_peak_ms=scenario.duration_ms / 2)
    pulse = gaussian_pulse(scenario.step_times(), centred)
    return xcorr_normalized(pulse, pulse)


__all__.append('ideal_curve')


def _joint_max(a, b):
    return max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))


def peak_height_difference(track_a, track_b, t_peak_index, normalizer=None):
    """
    a[t] - b[t] at t = t_peak_index, both tracks divided by normalizer.

    normalizer defaults to the joint maximum of the two tracks; two all-zero tracks differ by 0.
    """
    a = _values(track_a)
    b = _values(track_b)
    if a.shape != b.shape:
        raise ShapeException('tracks of different lengths %d and %d' % (len(a), len(b)))
    if not 0 <= t_peak_index < len(a):
        raise ShapeException('peak index %d outside track of length %d' % (t_peak_index, len(a)))
    if normalizer is None:
        normalizer = _joint_max(a, b)
    if not normalizer > 0:
        return 0.0
    return float(a[t_peak_index] - b[t_peak_index]) / normalizer


__all__.append('peak_height_difference')


def ensemble(tracks):
    """Pointwise median, quartiles, 10/90 % quantiles (linear interpolation) and mean of equal-length tracks."""
    tracks = list(tracks)
    if not tracks:
        raise ShapeException('ensemble of no tracks')
    lengths = set(len(_values(track)) for track in tracks)
    if len(lengths) != 1:
        raise ShapeException('ensemble of tracks with mixed lengths %s' % (sorted(lengths),))
    stack = np.array([_values(track) for track in tracks])
    q10, q25, median, q75, q90 = np.quantile(stack, [0.1, 0.25, 0.5, 0.75, 0.9], axis=0, method=QUANTILE_METHOD)
    return EnsembleTrack(
        median=median,
        q10=q10,
        q25=q25,
        q75=q75,
        q90=q90,
        mean=np.mean(stack, axis=0),
        count=len(tracks),
        quantile_method=QUANTILE_METHOD)


__all__.append('ensemble')


RealizationMetrics = namedtuple('RealizationMetrics', [
    'tracks',  # {roi label: Track}
    'true_xcorr',  # {roi label: estimated-vs-true curve}; absent for ROIs without a source
    'cross_xcorr',  # deep-vs-cortical estimated curve, or None
    'error',  # xcorr_error against the ideal curve
])

__all__.append('RealizationMetrics')


def realization_metrics(z_activity, scenario, truth, ideal, method_label='', snr_db=None, realization=None):
    """
    All per-realization metrics of one estimated sequence.

    truth: {roi label: true strength curve}, as from simulate.true_tracks.
    """
    tracks = {}
    curves = {}
    for label, indices in scenario.rois:
        tracks[label] = roi_track(z_activity, indices, roi_label=label, method_label=method_label, snr_db=snr_db, realization=realization)
        if np.any(truth[label] != 0) and np.any(tracks[label].values != 0):
            curves[label] = xcorr_normalized(tracks[label].values, truth[label])
    deep = tracks[scenario.deep_roi].values
    cortical = tracks[scenario.cortical_roi].values
    cross = xcorr_normalized(deep, cortical) if np.any(deep != 0) and np.any(cortical != 0) else None
    if scenario.cortical_roi not in curves:
        raise DegenerateInputException('cortical track or its truth is identically zero')
    error = xcorr_error(curves.get(scenario.deep_roi), curves[scenario.cortical_roi], ideal)
    return RealizationMetrics(tracks=tracks, true_xcorr=curves, cross_xcorr=cross, error=error)


__all__.append('realization_metrics')


ERROR_STATISTICS = ('mean', 'std', 'q10', 'q90')

__all__.append('ERROR_STATISTICS')


def _cell_order(keys, methods):
    rank = {name: i for i, name in enumerate(methods or ())}
    return sorted(keys, key=lambda key: (rank.get(key[0], len(rank)), key[0], -key[1]))


def error_table(errors, methods=None):
    """
    Cross-correlation error summary: one row (method, snr_db, statistic, value) per statistic in ERROR_STATISTICS.

    errors: {(method, snr_db): sequence of per-realization errors}. Rows follow the order of methods, then decreasing SNR. A cell with no errors gets rows whose value is None.
    """
    rows = []
    for method, snr in _cell_order(errors.keys(), methods):
        values = np.asarray(errors[(method, snr)], dtype=np.float64)
        if not len(values):
            rows.extend((method, snr, statistic, None) for statistic in ERROR_STATISTICS)
            continue
        q10, q90 = np.quantile(values, [0.1, 0.9], method=QUANTILE_METHOD)
        stats = {
            'mean': float(np.mean(values)),
            'std': float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
            'q10': float(q10),
            'q90': float(q90),
        }
        for statistic in ERROR_STATISTICS:
            rows.append((method, snr, statistic, stats[statistic]))
    return rows


__all__.append('error_table')


PeakRow = namedtuple('PeakRow', ['method', 'snr_db', 'moment', 'value', 'q10', 'q90'])

__all__.append('PeakRow')


def peak_table(tracks, deep_peak_step, cortical_peak_step, methods=None):
    """
    Track height differences at the peaking moments.

    tracks: {(method, snr_db): (deep Tracks, cortical Tracks)}, realizations in matching order.
    Row 'deep_peak' is deep minus cortical at the deep source's peak, 'cortical_peak' cortical minus deep at the cortical source's peak; either step may be None to skip its row. value is taken on the ensemble-median tracks normalized by their joint maximum; q10/q90 summarize the per-realization differences, each realization normalized by its own joint maximum.
    """
    rows = []
    for method, snr in _cell_order(tracks.keys(), methods):
        deep_tracks, cortical_tracks = tracks[(method, snr)]
        if len(deep_tracks) != len(cortical_tracks):
            raise ShapeException('unmatched track lists for %s at %r dB' % (method, snr))
        if not deep_tracks:
            for moment, step in [('deep_peak', deep_peak_step), ('cortical_peak', cortical_peak_step)]:
                if step is not None:
                    rows.append(PeakRow(method, snr, moment, None, None, None))
            continue
        deep_median = ensemble(deep_tracks).median
        cortical_median = ensemble(cortical_tracks).median
        for moment, step, first, second, firsts, seconds in [
                ('deep_peak', deep_peak_step, deep_median, cortical_median, deep_tracks, cortical_tracks),
                ('cortical_peak', cortical_peak_step, cortical_median, deep_median, cortical_tracks, deep_tracks)]:
            if step is None:
                continue
            per_realization = [peak_height_difference(a, b, step) for a, b in zip(firsts, seconds)]
            q10, q90 = np.quantile(per_realization, [0.1, 0.9], method=QUANTILE_METHOD)
            rows.append(PeakRow(
                method=method,
                snr_db=snr,
                moment=moment,
                value=peak_height_difference(first, second, step),
                q10=float(q10),
                q90=float(q90)))
    return rows


__all__.append('peak_table')


CorrelationRow = namedtuple('CorrelationRow', ['method', 'snr_db', 'curve', 'statistic', 'value'])

__all__.append('CorrelationRow')


# statistic -> reduction of the ensemble-median curve over all shifts
CURVE_STATISTICS = {
    'mean': np.mean,
    'median_max': np.max,
}

__all__.append('CURVE_STATISTICS')


def correlation_table(curves, methods=None):
    """
    Scalar summaries of cross-correlation curve ensembles.

    curves: {(method, snr_db): [(curve label, statistic, per-realization curves)]}, statistic a key of CURVE_STATISTICS. 'mean' is the deep-vs-cortical correlation averaged over the whole period, 'median_max' the highest point of an estimated-vs-true curve. Both are taken on the pointwise median. Curve lists with no curves are skipped.
    """
    rows = []
    for method, snr in _cell_order(curves.keys(), methods):
        for label, statistic, group in curves[(method, snr)]:
            if statistic not in CURVE_STATISTICS:
                raise ConfigException('unknown curve statistic %r' % (statistic,))
            group = list(group)
            if not group:
                continue
            value = CURVE_STATISTICS[statistic](ensemble(group).median)
            rows.append(CorrelationRow(method, snr, label, statistic, float(value)))
    return rows


__all__.append('correlation_table')
