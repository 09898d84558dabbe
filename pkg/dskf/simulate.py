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
Synthetic EEG experiments: lead fields with adjustable depth bias, Gaussian-pulse dipoles and noise at a given SNR.

Times in Scenario and SourceSpec are held in milliseconds (that is what scenario files contain, and keeping them lets a reloaded scenario reproduce recordings bit-for-bit); the seconds the state-space code wants are derived properties.
"""

from __future__ import absolute_import, division

from collections import namedtuple

import numpy as np
from zope.interface import implementer

from dskf.config import ConfigException
from dskf.errors import DegenerateInputException, ParameterException
from dskf.i.json import IJsonSerializable
from dskf.math import dB
from dskf.statespace import LeadField, assemble_model, sample_trajectory
from dskf import units


__all__ = []  # appended later


# Source radius range inside the unit-sphere scalp; keeps every source off the electrodes and off the exact centre, where the radial orientation is undefined.
_MIN_SOURCE_RADIUS = 0.05
_MAX_SOURCE_RADIUS = 0.85

_DEFAULT_ROI_NEIGHBOURS = 5

_TRUTH_STREAM = 1  # SeedSequence spawn key component for process-noise truth


@implementer(IJsonSerializable)
class SourceSpec(namedtuple('SourceSpec', [
        'index',  # column of the lead field
        'amplitude_nAm',
        't_peak_ms',
        'pulse_length_ms',
        'label'])):
    """One dipole with a Gaussian-pulse time course."""

    def __new__(cls, index, amplitude_nAm, t_peak_ms, pulse_length_ms, label=''):
        if not amplitude_nAm > 0:
            raise ConfigException('source amplitude must be positive, not %r' % (amplitude_nAm,))
        if not pulse_length_ms > 0:
            raise ConfigException('pulse length must be positive, not %r' % (pulse_length_ms,))
        if not t_peak_ms >= 0:
            raise ConfigException('peak time must be non-negative, not %r' % (t_peak_ms,))
        return super(SourceSpec, cls).__new__(cls, int(index), float(amplitude_nAm), float(t_peak_ms), float(pulse_length_ms), str(label))

    @property
    def amplitude(self):
        return self.amplitude_nAm

    @property
    def t_peak(self):
        """Peak time in seconds."""
        return self.t_peak_ms * units.ms.to_si

    @property
    def pulse_length(self):
        """Pulse length in seconds."""
        return self.pulse_length_ms * units.ms.to_si

    def to_json(self):
        return {
            'index': self.index,
            units.nAm.key('amplitude'): self.amplitude_nAm,
            units.ms.key('t_peak'): self.t_peak_ms,
            units.ms.key('pulse_length'): self.pulse_length_ms,
            'label': self.label,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(
                index=obj['index'],
                amplitude_nAm=obj[units.nAm.key('amplitude')],
                t_peak_ms=obj[units.ms.key('t_peak')],
                pulse_length_ms=obj[units.ms.key('pulse_length')],
                label=obj.get('label', ''))
        except KeyError as e:
            raise ConfigException('source is missing field %s' % (e,))


__all__.append('SourceSpec')


# Where a scenario's lead field comes from: a file path, or synthesis parameters.
LeadFieldRef = namedtuple('LeadFieldRef', [
    'path',  # lead-field file relative to the scenario file, or None if synthesized
    'electrodes',
    'sources',
    'seed',
    'depth_bias',
])

__all__.append('LeadFieldRef')


@implementer(IJsonSerializable)
class Scenario(namedtuple('Scenario', [
        'variant',
        'leadfield',  # LeadFieldRef
        'sources',  # tuple of SourceSpec
        'duration_ms',
        'n_steps',
        'snr_db',  # tuple of levels
        'n_realizations',
        'base_seed',
        'rois',  # tuple of (label, tuple of source indices), deep ROI first
        'deep_roi',  # label of the ROI around the deep source
        'cortical_roi',  # label of the ROI around the superficial source
        'oversample_hz',  # None, or a sampling rate whose samples are averaged into filter steps
        'truth_phi',  # None, or process-noise variance for model-driven truth
        'truth_order'])):
    """One reproducible experiment."""

    def __new__(cls, variant, leadfield, sources, duration_ms, n_steps, snr_db, n_realizations, base_seed, rois,
            deep_roi, cortical_roi, oversample_hz=None, truth_phi=None, truth_order=2):
        sources = tuple(sources)
        rois = tuple((str(label), tuple(int(i) for i in indices)) for label, indices in rois)
        n_steps = int(n_steps)
        n_realizations = int(n_realizations)
        if n_steps < 2:
            raise ConfigException('scenario needs at least 2 steps, not %d' % n_steps)
        if n_realizations < 1:
            raise ConfigException('scenario needs at least 1 realization, not %d' % n_realizations)
        if not duration_ms > 0:
            raise ConfigException('duration must be positive')
        labels = [label for label, _ in rois]
        if len(set(labels)) != len(labels):
            raise ConfigException('duplicate ROI labels: %r' % (labels,))
        for label, indices in rois:
            if not indices:
                raise ConfigException('ROI %r is empty' % (label,))
            if min(indices) < 0 or max(indices) >= leadfield.sources:
                raise ConfigException('ROI %r has indices outside [0, %d)' % (label, leadfield.sources))
        for source in sources:
            if not 0 <= source.index < leadfield.sources:
                raise ConfigException('source %r index %d is outside [0, %d)' % (source.label, source.index, leadfield.sources))
            if source.t_peak_ms > duration_ms:
                raise ConfigException('source %r peaks after the end of the scenario' % (source.label,))
        for label in (deep_roi, cortical_roi):
            if label not in labels:
                raise ConfigException('no ROI named %r' % (label,))
        return super(Scenario, cls).__new__(cls, str(variant), leadfield, sources, float(duration_ms), n_steps,
            tuple(float(level) for level in snr_db), n_realizations, int(base_seed), rois, str(deep_roi),
            str(cortical_roi), oversample_hz, truth_phi, int(truth_order))

    @property
    def duration(self):
        """Duration in seconds."""
        return self.duration_ms * units.ms.to_si

    @property
    def dt(self):
        """Filter step length in seconds."""
        return self.duration / self.n_steps

    def step_times(self):
        """Sample times in seconds: step centres (i + 0.5) dt."""
        return (np.arange(self.n_steps) + 0.5) * self.dt

    def roi(self, label):
        for roi_label, indices in self.rois:
            if roi_label == label:
                return indices
        raise ConfigException('no ROI named %r' % (label,))

    def to_json(self):
        return {
            'type': 'Scenario',
            'format_version': 1,
            'variant': self.variant,
            'leadfield': {
                'path': self.leadfield.path,
                'electrodes': self.leadfield.electrodes,
                'sources': self.leadfield.sources,
                'seed': self.leadfield.seed,
                'depth_bias': self.leadfield.depth_bias,
            },
            'sources': list(self.sources),
            units.ms.key('duration'): self.duration_ms,
            'n_steps': self.n_steps,
            units.dB.key('snr'): list(self.snr_db),
            'n_realizations': self.n_realizations,
            'base_seed': self.base_seed,
            'rois': [{'label': label, 'indices': list(indices)} for label, indices in self.rois],
            'deep_roi': self.deep_roi,
            'cortical_roi': self.cortical_roi,
            units.Hz.key('oversample'): self.oversample_hz,
            'truth_phi': self.truth_phi,
            'truth_order': self.truth_order,
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get('type') != 'Scenario':
            raise ConfigException('not a scenario description')
        if obj.get('format_version') != 1:
            raise ConfigException('unsupported scenario format version %r' % (obj.get('format_version'),))
        try:
            lf = obj['leadfield']
            return cls(
                variant=obj['variant'],
                leadfield=LeadFieldRef(
                    path=lf.get('path'),
                    electrodes=int(lf['electrodes']),
                    sources=int(lf['sources']),
                    seed=lf.get('seed'),
                    depth_bias=lf.get('depth_bias')),
                sources=[SourceSpec.from_json(s) for s in obj['sources']],
                duration_ms=obj[units.ms.key('duration')],
                n_steps=obj['n_steps'],
                snr_db=obj[units.dB.key('snr')],
                n_realizations=obj['n_realizations'],
                base_seed=obj['base_seed'],
                rois=[(r['label'], r['indices']) for r in obj['rois']],
                deep_roi=obj['deep_roi'],
                cortical_roi=obj['cortical_roi'],
                oversample_hz=obj.get(units.Hz.key('oversample')),
                truth_phi=obj.get('truth_phi'),
                truth_order=obj.get('truth_order', 2))
        except (KeyError, TypeError) as e:
            raise ConfigException('malformed scenario: %s' % (e,))


__all__.append('Scenario')


Recording = namedtuple('Recording', [
    'y',  # T x m noisy observations
    'clean',  # T x m noiseless signal
    'noise_sigma',  # per-channel noise standard deviation used
    'seed',  # base seed the noise was derived from
    'realization',
    'snr_db',
])

__all__.append('Recording')


def gaussian_pulse(t, spec):
    """
    Strength (nA·m) of a source at time(s) t in seconds.

    The pulse length is taken as the +-3 sigma support, so sigma = pulse_length / 6.
    """
    sigma = spec.pulse_length / 6
    t = np.asarray(t, dtype=np.float64)
    return spec.amplitude * np.exp(-(t - spec.t_peak) ** 2 / (2 * sigma ** 2))


__all__.append('gaussian_pulse')


def _fibonacci_sphere(count):
    i = np.arange(count) + 0.5
    polar = np.arccos(1 - 2 * i / count)
    azimuth = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar)])


def synth_leadfield(m, n, seed, depth_bias=1.0):
    """
    Spherical toy lead field with a controllable depth bias.

    Electrodes lie on the unit sphere, sources uniformly (by volume) inside it with radial orientation. Entry (i, j) is cos(angle between e_i - s_j and the orientation) / |e_i - s_j|^2, and column j is then multiplied by (1 - depth_j)^depth_bias with depth_j = 1 - |s_j|, which makes deep sources weaker still.
    """
    if m < 2 or n < 1:
        raise ParameterException('need m >= 2 and n >= 1, got m=%r n=%r' % (m, n))
    if not depth_bias >= 0:
        raise ParameterException('depth bias exponent must be non-negative, not %r' % (depth_bias,))
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, np.newaxis]
    radii = _MAX_SOURCE_RADIUS * rng.uniform(0.0, 1.0, n) ** (1 / 3)
    radii = np.maximum(radii, _MIN_SOURCE_RADIUS)
    positions = directions * radii[:, np.newaxis]
    electrodes = _fibonacci_sphere(m)

    offsets = electrodes[:, np.newaxis, :] - positions[np.newaxis, :, :]  # m x n x 3
    distances = np.linalg.norm(offsets, axis=2)
    cosines = np.einsum('ijk,jk->ij', offsets, directions) / distances
    matrix = cosines / distances ** 2
    depth = 1 - radii
    matrix = matrix * ((1 - depth) ** depth_bias)[np.newaxis, :]
    return LeadField(matrix, positions)


__all__.append('synth_leadfield')


def _amplitudes(sources, times):
    return np.column_stack([gaussian_pulse(times, spec) for spec in sources]) if sources else np.zeros((len(times), 0))


def simulate_clean(leadfield, sources, duration, n_steps, oversample_hz=None):
    """
    Noiseless observations, T x m.

    Row i is sum_k L[:, idx_k] pulse_k(t_i) at step centres t_i = (i + 0.5) dt, dt = duration / n_steps (seconds).
    With oversample_hz the pulses are sampled at that rate instead and the samples falling in each step are averaged.
    """
    sources = list(sources)
    for spec in sources:
        if not 0 <= spec.index < leadfield.source_count:
            raise ConfigException('source %r index %d is outside [0, %d)' % (spec.label, spec.index, leadfield.source_count))
    if n_steps < 1 or not duration > 0:
        raise ParameterException('need a positive duration and at least one step')
    columns = leadfield.matrix[:, [spec.index for spec in sources]]
    dt = duration / n_steps
    if oversample_hz is None:
        times = (np.arange(n_steps) + 0.5) * dt
        return _amplitudes(sources, times).dot(columns.T)
    sample_count = int(round(duration * oversample_hz))
    if sample_count < n_steps:
        raise ParameterException('oversampling rate %r Hz gives fewer samples than steps' % (oversample_hz,))
    times = (np.arange(sample_count) + 0.5) / oversample_hz
    bins = np.minimum((times / dt).astype(int), n_steps - 1)
    samples = _amplitudes(sources, times).dot(columns.T)
    clean = np.zeros((n_steps, leadfield.electrode_count))
    np.add.at(clean, bins, samples)
    counts = np.bincount(bins, minlength=n_steps)
    if np.any(counts == 0):
        raise ParameterException('oversampling rate %r Hz leaves some steps without samples' % (oversample_hz,))
    return clean / counts[:, np.newaxis]


__all__.append('simulate_clean')


def realization_seed(base_seed, realization):
    """Seed for one noise realization: base seed and realization index mixed by numpy's SeedSequence."""
    return np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(realization)])


__all__.append('realization_seed')


def noise_sigma(clean, snr_db):
    """Per-entry noise standard deviation giving snr_db against the pooled mean power of clean."""
    power = float(np.mean(np.square(clean)))
    if not power > 0:
        raise DegenerateInputException('clean signal has zero power; SNR is undefined')
    return (power / dB(snr_db)) ** 0.5


__all__.append('noise_sigma')


def add_noise(clean, snr_db, seed, realization=0):
    """
    Add white Gaussian noise at snr_db (pooled over channels and steps) and return a Recording.

    The noise depends only on (seed, realization); the same realization at different SNRs uses the same underlying draws, scaled.
    """
    clean = np.asarray(clean, dtype=np.float64)
    sigma = noise_sigma(clean, snr_db)
    rng = np.random.default_rng(realization_seed(seed, realization))
    y = clean + sigma * rng.standard_normal(clean.shape)
    return Recording(y=y, clean=clean, noise_sigma=sigma, seed=int(seed), realization=int(realization), snr_db=float(snr_db))


__all__.append('add_noise')


def default_rois(leadfield, index, k=_DEFAULT_ROI_NEIGHBOURS):
    """The source itself plus its k nearest sources by position, nearest first."""
    distances = np.linalg.norm(leadfield.positions - leadfield.positions[index], axis=1)
    order = np.argsort(distances, kind='stable')
    neighbours = [int(j) for j in order if j != index][:k]
    return tuple([int(index)] + neighbours)


__all__.append('default_rois')


def designated_indices(leadfield, deep_index=None, superficial_index=None, visual_index=None):
    """
    Pick the deep, superficial and alternate superficial sources.

    Deep: the source closest to the centroid of all sources. Superficial: the strongest column. Alternate: among the strongest tenth of columns, the one farthest from the superficial source. Any of them can be given explicitly instead.
    """
    positions = leadfield.positions
    norms = leadfield.column_norms()
    n = leadfield.source_count
    if deep_index is None:
        deep_index = int(np.argmin(np.linalg.norm(positions - positions.mean(axis=0), axis=1)))
    if superficial_index is None:
        superficial_index = int(np.argmax(norms))
    if visual_index is None:
        strong = np.flatnonzero(norms >= np.quantile(norms, 0.9))
        distances = np.linalg.norm(positions[strong] - positions[superficial_index], axis=1)
        visual_index = int(strong[np.argmax(distances)])
    chosen = (deep_index, superficial_index, visual_index)
    for i in chosen:
        if not 0 <= i < n:
            raise ConfigException('designated source index %r is outside [0, %d)' % (i, n))
    if deep_index == superficial_index or visual_index == superficial_index:
        raise ConfigException('designated deep/superficial sources are not distinct: %r' % (chosen,))
    return chosen


__all__.append('designated_indices')


VARIANTS = {
    'default': 'deep source peaking first, then superficial source',
    'inverted': 'activation order swapped',
    'single_source': 'superficial source only',
    'visual': 'superficial source moved to an alternate location',
}

__all__.append('VARIANTS')


def build_tracking_scenario(variant, leadfield, leadfield_ref, base_seed=0, deep_index=None, superficial_index=None,
        visual_index=None, n_realizations=20, snr_db=(30, 20, 10), oversample_hz=None):
    """
    The two-source tracking protocol: 10 nA·m sources with 2 ms Gaussian pulses peaking at 1.1 ms (deep) and 1.9 ms (superficial) within 3 ms, filtered over 40 steps.
    """
    if variant not in VARIANTS:
        raise ConfigException('unknown scenario variant %r' % (variant,))
    deep, superficial, alternate = designated_indices(leadfield, deep_index, superficial_index, visual_index)
    deep_peak, cortical_peak = 1.1, 1.9
    if variant == 'inverted':
        deep_peak, cortical_peak = cortical_peak, deep_peak
    cortical_label = 'somatosensory'
    if variant == 'visual':
        superficial = alternate
        cortical_label = 'visual'
    sources = [
        SourceSpec(deep, 10.0, deep_peak, 2.0, 'thalamic'),
        SourceSpec(superficial, 10.0, cortical_peak, 2.0, cortical_label),
    ]
    if variant == 'single_source':
        sources = sources[1:]
    return Scenario(
        variant=variant,
        leadfield=leadfield_ref,
        sources=sources,
        duration_ms=3.0,
        n_steps=40,
        snr_db=snr_db,
        n_realizations=n_realizations,
        base_seed=base_seed,
        rois=[
            ('thalamic', default_rois(leadfield, deep)),
            (cortical_label, default_rois(leadfield, superficial)),
        ],
        deep_roi='thalamic',
        cortical_roi=cortical_label,
        oversample_hz=oversample_hz)


__all__.append('build_tracking_scenario')


def scenario_clean(scenario, leadfield, realization=0):
    """
    Noiseless observations for a scenario.

    With truth_phi set, the activity of a process-noise-driven trajectory of order truth_order is added on top of the pulses; that part differs per realization.
    """
    clean = simulate_clean(leadfield, scenario.sources, scenario.duration, scenario.n_steps, scenario.oversample_hz)
    if scenario.truth_phi is None:
        return clean
    # R is irrelevant to trajectory sampling; 1.0 just satisfies assembly.
    model = assemble_model(leadfield, scenario.truth_order, scenario.dt, scenario.truth_phi, 1.0)
    seed = np.random.SeedSequence([scenario.base_seed & 0xFFFFFFFFFFFFFFFF, int(realization), _TRUTH_STREAM])
    states, _ = sample_trajectory(model, scenario.n_steps, seed)
    return clean + model.activity_block(states).dot(leadfield.matrix.T)


__all__.append('scenario_clean')


def simulate_recordings(scenario, leadfield):
    """Yield every Recording of a scenario, ordered by SNR level then realization."""
    shared_clean = None if scenario.truth_phi is not None else scenario_clean(scenario, leadfield)
    for snr in scenario.snr_db:
        for realization in range(scenario.n_realizations):
            clean = shared_clean if shared_clean is not None else scenario_clean(scenario, leadfield, realization)
            yield add_noise(clean, snr, scenario.base_seed, realization)


__all__.append('simulate_recordings')


def true_tracks(scenario):
    """
    Noiseless strength curve per ROI label: the summed pulses of the scenario's sources lying in that ROI, at step centres.

    An ROI without a source gets an all-zero curve.
    """
    times = scenario.step_times()
    tracks = {}
    for label, indices in scenario.rois:
        curve = np.zeros(scenario.n_steps)
        for spec in scenario.sources:
            if spec.index in indices:
                curve += gaussian_pulse(times, spec)
        tracks[label] = curve
    return tracks


__all__.append('true_tracks')


def peak_step(scenario, spec):
    """Index of the filter step whose centre is nearest the source's peak time."""
    return int(np.argmin(np.abs(scenario.step_times() - spec.t_peak)))


__all__.append('peak_step')
