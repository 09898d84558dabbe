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

from __future__ import absolute_import, division

import json

import numpy as np
from scipy.stats import spearmanr
from twisted.trial import unittest

from dskf.config import ConfigException
from dskf.errors import DegenerateInputException, ParameterException
from dskf.i.json import serialize
from dskf.statespace import LeadField
from dskf.simulate import LeadFieldRef, Scenario, SourceSpec, add_noise, build_tracking_scenario, default_rois, designated_indices, gaussian_pulse, noise_sigma, peak_step, scenario_clean, simulate_clean, simulate_recordings, synth_leadfield, true_tracks


def _ref(lf, seed=1):
    return LeadFieldRef(path=None, electrodes=lf.electrode_count, sources=lf.source_count, seed=seed, depth_bias=1.0)


class TestSourceSpec(unittest.TestCase):
    def test_units(self):
        spec = SourceSpec(3, 10.0, 1.1, 2.0, 'thalamic')
        self.assertAlmostEqual(spec.t_peak, 1.1e-3, delta=1e-18)
        self.assertAlmostEqual(spec.pulse_length, 2e-3, delta=1e-18)
        self.assertEqual(spec.amplitude, 10.0)

    def test_validation(self):
        self.assertRaises(ConfigException, lambda: SourceSpec(0, 0.0, 1.0, 2.0))
        self.assertRaises(ConfigException, lambda: SourceSpec(0, 1.0, 1.0, 0.0))
        self.assertRaises(ConfigException, lambda: SourceSpec(0, 1.0, -1.0, 2.0))

    def test_json(self):
        spec = SourceSpec(3, 10.0, 1.1, 2.0, 'thalamic')
        self.assertEqual(SourceSpec.from_json(json.loads(serialize(spec))), spec)

    def test_json_missing_field(self):
        self.assertRaises(ConfigException, lambda: SourceSpec.from_json({'index': 1}))


class TestGaussianPulse(unittest.TestCase):
    longMessage = True

    def setUp(self):
        self.spec = SourceSpec(0, 10.0, 1.5, 2.0)
        self.sigma = 2e-3 / 6

    def test_peak(self):
        self.assertEqual(gaussian_pulse(self.spec.t_peak, self.spec), 10.0)

    def test_three_sigma(self):
        for sign in (-1, 1):
            self.assertAlmostEqual(
                gaussian_pulse(self.spec.t_peak + sign * 3 * self.sigma, self.spec),
                10.0 * np.exp(-4.5), places=12)

    def test_symmetric(self):
        for delta in (1e-5, 2e-4, 7e-4):
            self.assertAlmostEqual(
                gaussian_pulse(self.spec.t_peak + delta, self.spec),
                gaussian_pulse(self.spec.t_peak - delta, self.spec), places=12)


class TestSynthLeadField(unittest.TestCase):
    longMessage = True

    def test_deterministic(self):
        a = synth_leadfield(16, 50, 9)
        b = synth_leadfield(16, 50, 9)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        np.testing.assert_array_equal(a.positions, b.positions)
        self.assertNotEqual(a, synth_leadfield(16, 50, 10))

    def test_geometry(self):
        lf = synth_leadfield(16, 300, 2)
        radii = np.linalg.norm(lf.positions, axis=1)
        self.assertTrue(np.all(radii >= 0.05 - 1e-12))
        self.assertTrue(np.all(radii <= 0.85 + 1e-12))
        self.assertTrue(np.all(lf.column_norms() > 0))

    def test_depth_bias(self):
        lf = synth_leadfield(32, 300, 4, depth_bias=2.0)
        depth = 1 - np.linalg.norm(lf.positions, axis=1)
        correlation, _ = spearmanr(depth, lf.column_norms())
        self.assertLess(correlation, 0)

    def test_neutral_exponent(self):
        plain = synth_leadfield(8, 20, 5, depth_bias=0.0)
        biased = synth_leadfield(8, 20, 5, depth_bias=1.0)
        radii = np.linalg.norm(plain.positions, axis=1)
        np.testing.assert_allclose(biased.matrix, plain.matrix * radii[np.newaxis, :], rtol=1e-12)

    def test_invalid(self):
        self.assertRaises(ParameterException, lambda: synth_leadfield(1, 10, 0))
        self.assertRaises(ParameterException, lambda: synth_leadfield(4, 10, 0, depth_bias=-1.0))


class TestSimulateClean(unittest.TestCase):
    longMessage = True

    def setUp(self):
        self.lf = synth_leadfield(8, 20, 1)
        self.a = SourceSpec(2, 10.0, 1.1, 2.0)
        self.b = SourceSpec(7, 5.0, 1.9, 2.0)

    def test_no_sources(self):
        np.testing.assert_array_equal(simulate_clean(self.lf, [], 3e-3, 40), np.zeros((40, 8)))

    def test_single_step_at_peak(self):
        # one 3 ms step is centred on 1.5 ms
        spec = SourceSpec(4, 3.0, 1.5, 2.0)
        np.testing.assert_allclose(simulate_clean(self.lf, [spec], 3e-3, 1)[0], 3.0 * self.lf.matrix[:, 4], rtol=1e-15)

    def test_linearity(self):
        both = simulate_clean(self.lf, [self.a, self.b], 3e-3, 40)
        parts = simulate_clean(self.lf, [self.a], 3e-3, 40) + simulate_clean(self.lf, [self.b], 3e-3, 40)
        np.testing.assert_allclose(both, parts, rtol=1e-12, atol=1e-12 * np.abs(both).max())

    def test_two_lobes(self):
        # orthonormal columns so the two lobes add in power
        lf = LeadField(np.eye(8)[:, :2], np.zeros((2, 3)))
        clean = simulate_clean(lf, [SourceSpec(0, 10.0, 1.1, 2.0), SourceSpec(1, 10.0, 1.9, 2.0)], 3e-3, 40)
        norms = np.linalg.norm(clean, axis=1)
        self.assertEqual(int(np.argmax(norms[:20])), 14)
        self.assertEqual(20 + int(np.argmax(norms[20:])), 25)

    def test_bad_index(self):
        self.assertRaises(ConfigException, lambda: simulate_clean(self.lf, [SourceSpec(20, 1.0, 1.0, 2.0)], 3e-3, 40))

    def test_oversampled_average(self):
        plain = simulate_clean(self.lf, [self.a], 3e-3, 40)
        averaged = simulate_clean(self.lf, [self.a], 3e-3, 40, oversample_hz=20e3)
        self.assertEqual(averaged.shape, (40, 8))
        # averaging smooths but keeps the shape close to the step-centre samples
        self.assertLess(np.abs(averaged - plain).max(), 0.2 * np.abs(plain).max())

    def test_oversample_too_slow(self):
        self.assertRaises(ParameterException, lambda: simulate_clean(self.lf, [self.a], 3e-3, 40, oversample_hz=1e3))


class TestNoise(unittest.TestCase):
    longMessage = True

    def setUp(self):
        self.lf = synth_leadfield(128, 100, 3)
        self.clean = simulate_clean(self.lf, [SourceSpec(5, 10.0, 1.1, 2.0), SourceSpec(9, 10.0, 1.9, 2.0)], 3e-3, 40)

    def test_snr_calibration(self):
        power = np.mean(np.square(self.clean))
        for snr in (10.0, 20.0, 30.0):
            recording = add_noise(self.clean, snr, 7)
            empirical = np.mean(np.square(recording.y - self.clean))
            self.assertLess(abs(10 * np.log10(power / empirical) - snr), 0.5, snr)

    def test_zero_db(self):
        lf = synth_leadfield(500, 20, 3)
        clean = simulate_clean(lf, [SourceSpec(5, 10.0, 1.1, 2.0)], 3e-3, 40)
        recording = add_noise(clean, 0.0, 3)
        ratio = np.mean(np.square(recording.y - clean)) / np.mean(np.square(clean))
        self.assertLess(abs(ratio - 1), 0.05)

    def test_vanishing_noise(self):
        recording = add_noise(self.clean, 300.0, 3)
        np.testing.assert_allclose(recording.y, self.clean, rtol=0, atol=1e-10 * np.abs(self.clean).max())

    def test_realizations_differ(self):
        a = add_noise(self.clean, 20.0, 7, 0)
        b = add_noise(self.clean, 20.0, 7, 1)
        self.assertFalse(np.array_equal(a.y, b.y))
        np.testing.assert_array_equal(a.clean, b.clean)
        np.testing.assert_array_equal(a.y, add_noise(self.clean, 20.0, 7, 0).y)

    def test_draws_shared_across_snr(self):
        a = add_noise(self.clean, 30.0, 7, 2)
        b = add_noise(self.clean, 10.0, 7, 2)
        np.testing.assert_allclose((a.y - self.clean) / a.noise_sigma, (b.y - self.clean) / b.noise_sigma, rtol=1e-9, atol=1e-12)

    def test_zero_signal(self):
        self.assertRaises(DegenerateInputException, lambda: noise_sigma(np.zeros((4, 3)), 10.0))
        self.assertRaises(DegenerateInputException, lambda: add_noise(np.zeros((4, 3)), 10.0, 0))

    def test_recording_fields(self):
        recording = add_noise(self.clean, 20.0, 11, 4)
        self.assertEqual((recording.seed, recording.realization, recording.snr_db), (11, 4, 20.0))
        self.assertAlmostEqual(recording.noise_sigma, noise_sigma(self.clean, 20.0))


class TestScenario(unittest.TestCase):
    longMessage = True

    def setUp(self):
        self.lf = synth_leadfield(16, 60, 1)

    def test_default_variant(self):
        scenario = build_tracking_scenario('default', self.lf, _ref(self.lf), base_seed=7)
        self.assertEqual(len(scenario.sources), 2)
        self.assertEqual(scenario.n_realizations, 20)
        self.assertEqual(scenario.n_steps, 40)
        self.assertEqual(scenario.snr_db, (30.0, 20.0, 10.0))
        self.assertEqual(scenario.duration_ms, 3.0)
        self.assertAlmostEqual(scenario.dt, 3e-3 / 40, delta=1e-18)
        deep, cortical = scenario.sources
        self.assertEqual((deep.t_peak_ms, cortical.t_peak_ms), (1.1, 1.9))
        self.assertEqual(scenario.deep_roi, 'thalamic')
        self.assertEqual(scenario.cortical_roi, 'somatosensory')

    def test_variants(self):
        inverted = build_tracking_scenario('inverted', self.lf, _ref(self.lf))
        self.assertEqual(inverted.sources[0].t_peak_ms, 1.9)
        single = build_tracking_scenario('single_source', self.lf, _ref(self.lf))
        self.assertEqual(len(single.sources), 1)
        self.assertEqual(single.sources[0].label, 'somatosensory')
        visual = build_tracking_scenario('visual', self.lf, _ref(self.lf))
        default = build_tracking_scenario('default', self.lf, _ref(self.lf))
        self.assertNotEqual(visual.sources[1].index, default.sources[1].index)
        self.assertEqual(visual.cortical_roi, 'visual')

    def test_unknown_variant(self):
        self.assertRaises(ConfigException, lambda: build_tracking_scenario('mirror', self.lf, _ref(self.lf)))

    def test_designated_indices(self):
        deep, superficial, alternate = designated_indices(self.lf)
        self.assertEqual(superficial, int(np.argmax(self.lf.column_norms())))
        centroid = self.lf.positions.mean(axis=0)
        distances = np.linalg.norm(self.lf.positions - centroid, axis=1)
        self.assertEqual(distances[deep], distances.min())
        self.assertNotEqual(alternate, superficial)
        self.assertEqual(designated_indices(self.lf, 3, 4, 5), (3, 4, 5))
        self.assertRaises(ConfigException, lambda: designated_indices(self.lf, 3, 3, 5))
        self.assertRaises(ConfigException, lambda: designated_indices(self.lf, 60, 3, 5))

    def test_default_rois(self):
        roi = default_rois(self.lf, 10)
        self.assertEqual(len(roi), 6)
        self.assertEqual(roi[0], 10)
        distances = np.linalg.norm(self.lf.positions - self.lf.positions[10], axis=1)
        farthest_member = max(distances[j] for j in roi)
        outside = [distances[j] for j in range(60) if j not in roi]
        self.assertLessEqual(farthest_member, min(outside))

    def test_validation(self):
        ref = _ref(self.lf)
        source = SourceSpec(1, 10.0, 1.0, 2.0)
        good = dict(variant='x', leadfield=ref, sources=[source], duration_ms=3.0, n_steps=40, snr_db=[10],
            n_realizations=2, base_seed=0, rois=[('a', [1, 2])], deep_roi='a', cortical_roi='a')
        Scenario(**good)
        for change in [
                {'n_steps': 1},
                {'n_realizations': 0},
                {'duration_ms': 0.0},
                {'rois': [('a', [])]},
                {'rois': [('a', [60])]},
                {'rois': [('a', [1]), ('a', [2])]},
                {'sources': [SourceSpec(60, 10.0, 1.0, 2.0)]},
                {'sources': [SourceSpec(1, 10.0, 4.0, 2.0)]},
                {'deep_roi': 'b'}]:
            bad = dict(good, **change)
            self.assertRaises(ConfigException, lambda: Scenario(**bad))

    def test_step_times(self):
        scenario = build_tracking_scenario('default', self.lf, _ref(self.lf))
        times = scenario.step_times()
        self.assertEqual(len(times), 40)
        self.assertAlmostEqual(times[0], 0.5 * 3e-3 / 40, delta=1e-18)
        self.assertEqual(peak_step(scenario, scenario.sources[0]), int(np.argmin(np.abs(times - 1.1e-3))))

    def test_json_reload_is_exact(self):
        scenario = build_tracking_scenario('default', self.lf, _ref(self.lf), base_seed=123, n_realizations=2)
        reloaded = Scenario.from_json(json.loads(serialize(scenario)))
        self.assertEqual(reloaded, scenario)
        for a, b in zip(simulate_recordings(scenario, self.lf), simulate_recordings(reloaded, self.lf)):
            np.testing.assert_array_equal(a.y, b.y)

    def test_json_errors(self):
        self.assertRaises(ConfigException, lambda: Scenario.from_json({'type': 'Other'}))
        self.assertRaises(ConfigException, lambda: Scenario.from_json({'type': 'Scenario', 'format_version': 2}))
        self.assertRaises(ConfigException, lambda: Scenario.from_json({'type': 'Scenario', 'format_version': 1}))


class TestRecordings(unittest.TestCase):
    longMessage = True

    def setUp(self):
        self.lf = synth_leadfield(16, 60, 1)
        self.scenario = build_tracking_scenario('default', self.lf, _ref(self.lf), base_seed=5, n_realizations=3, snr_db=(30, 10))

    def test_order_and_count(self):
        recordings = list(simulate_recordings(self.scenario, self.lf))
        self.assertEqual([(r.snr_db, r.realization) for r in recordings],
            [(30.0, 0), (30.0, 1), (30.0, 2), (10.0, 0), (10.0, 1), (10.0, 2)])
        for recording in recordings:
            self.assertEqual(recording.y.shape, (40, 16))

    def test_true_tracks(self):
        tracks = true_tracks(self.scenario)
        self.assertEqual(set(tracks), {'thalamic', 'somatosensory'})
        times = self.scenario.step_times()
        np.testing.assert_allclose(tracks['thalamic'], gaussian_pulse(times, self.scenario.sources[0]))

    def test_single_source_has_zero_deep_track(self):
        scenario = build_tracking_scenario('single_source', self.lf, _ref(self.lf))
        tracks = true_tracks(scenario)
        if scenario.sources[0].index not in scenario.roi('thalamic'):
            np.testing.assert_array_equal(tracks['thalamic'], 0)

    def test_model_driven_truth(self):
        scenario = self.scenario._replace(truth_phi=1e3)
        a = scenario_clean(scenario, self.lf, 0)
        b = scenario_clean(scenario, self.lf, 1)
        self.assertFalse(np.array_equal(a, b))
        np.testing.assert_array_equal(a, scenario_clean(scenario, self.lf, 0))
        self.assertFalse(np.array_equal(a, scenario_clean(self.scenario, self.lf, 0)))
