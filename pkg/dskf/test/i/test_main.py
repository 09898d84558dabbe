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
See also test_config.py.
"""

from __future__ import absolute_import, division

import os
import os.path
import shutil
import tempfile
import textwrap

from twisted.internet import defer
from twisted.trial import unittest

from dskf import main
from dskf.io import load_results, read_summary, read_table


_SMALL = ['--electrodes', '8', '--sources', '40', '--realizations', '2', '--snr', '30', '--seed', '7']


class TestMain(unittest.TestCase):
    longMessage = True

    def setUp(self):
        self.__temp_dir = tempfile.mkdtemp(prefix='dskf_test_main_tmp')

    def tearDown(self):
        shutil.rmtree(self.__temp_dir)

    def path(self, *names):
        return os.path.join(self.__temp_dir, *names)

    def __run_main(self, *args):
        return main.main(argv=['dskf'] + list(args), _abort_for_test=True)

    @defer.inlineCallbacks
    def test_pipeline(self):
        code = yield self.__run_main('simulate', '--output', self.path('out'), *_SMALL)
        self.assertEqual(code, main.EXIT_OK)
        for name in ('scenario.json', 'leadfield.lf', 'manifest.txt', 'recordings/snr+030.0_r001.rec'):
            self.assertTrue(os.path.exists(self.path('out', name)), msg=name)

        code = yield self.__run_main('run', self.path('out'), '--workers', '2')
        self.assertEqual(code, main.EXIT_OK)
        results = load_results(self.path('out', 'results.dskf'))
        self.assertEqual(len(results), 4 * 2)
        self.assertEqual(results.failures, [])
        self.assertEqual(results.run('dskf3', 30.0, 1).z.shape, (40, 40))

        code = yield self.__run_main('evaluate', self.path('out', 'results.dskf'))
        self.assertEqual(code, main.EXIT_OK)
        header, rows = read_table(self.path('out', 'evaluation', 'error_table.csv'))
        self.assertEqual(header, ['method', 'snr_db', 'statistic', 'value'])
        self.assertEqual([row[0] for row in rows[::4]], ['skf', 'sskf', 'dskf2', 'dskf3'])
        summary = read_summary(self.path('out', 'evaluation', 'summary.json'))
        self.assertEqual(summary['variant'], 'default')
        self.assertEqual(len(summary['cells']), 4)
        self.assertEqual(summary['missing_cells'], [])
        for name in ('tracks_dskf3_30db.csv', 'xcorr_skf_30db.svg', 'peak_table.csv', 'correlation_table.csv', 'manifest.txt'):
            self.assertTrue(os.path.exists(self.path('out', 'evaluation', name)), msg=name)

    @defer.inlineCallbacks
    def test_correlation_summaries(self):
        yield self.__run_main('simulate', '--output', self.path('out'), *_SMALL)
        yield self.__run_main('run', self.path('out'), '--methods', 'skf', 'dskf3')
        code = yield self.__run_main('evaluate', self.path('out', 'results.dskf'))
        self.assertEqual(code, main.EXIT_OK)
        header, rows = read_table(self.path('out', 'evaluation', 'correlation_table.csv'))
        self.assertEqual(header, ['method', 'snr_db', 'curve', 'statistic', 'value'])
        self.assertEqual([(row[0], row[2], row[3]) for row in rows], [
            (method, curve, statistic)
            for method in ('skf', 'dskf3')
            for curve, statistic in [
                ('thalamic_vs_somatosensory', 'mean'),
                ('thalamic_vs_true', 'median_max'),
                ('somatosensory_vs_true', 'median_max')]])
        for row in rows:
            self.assertLessEqual(abs(float(row[4])), 1.0, msg=row)
        summary = read_summary(self.path('out', 'evaluation', 'summary.json'))
        self.assertEqual([float(entry['value']) for entry in summary['correlation_table']], [float(row[4]) for row in rows])
        stored = load_results(self.path('out', 'results.dskf')).tables
        self.assertEqual(sorted(stored), ['correlation_table', 'error_table', 'peak_table'])
        self.assertEqual([row[:4] for row in stored['correlation_table']], [
            [row[0], float(row[1]), row[2], row[3]] for row in rows])

    @defer.inlineCallbacks
    def test_end_to_end_reproducible(self):
        for name in ('a', 'b'):
            code = yield self.__run_main('simulate', '--output', self.path(name), *_SMALL)
            self.assertEqual(code, main.EXIT_OK)
            code = yield self.__run_main('run', self.path(name), '--workers', '2')
            self.assertEqual(code, main.EXIT_OK)
            code = yield self.__run_main('evaluate', self.path(name, 'results.dskf'))
            self.assertEqual(code, main.EXIT_OK)
        for name in ('results.dskf', os.path.join('evaluation', 'manifest.txt')):
            with open(self.path('a', name), 'rb') as a, open(self.path('b', name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), msg=name)

    @defer.inlineCallbacks
    def test_simulate_deterministic(self):
        for name in ('a', 'b'):
            code = yield self.__run_main('simulate', '--output', self.path(name), '--variant', 'inverted', *_SMALL)
            self.assertEqual(code, main.EXIT_OK)
        with open(self.path('a', 'manifest.txt')) as a, open(self.path('b', 'manifest.txt')) as b:
            self.assertEqual(a.read(), b.read())

    @defer.inlineCallbacks
    def test_methods_and_config_file(self):
        with open(self.path('config.py'), 'w') as config:
            config.write(textwrap.dedent('''\
                config.set_methods('sdskf3')
                config.set_filter(p=0.5)
            '''))
        yield self.__run_main('simulate', '--output', self.path('out'), *_SMALL)
        code = yield self.__run_main('run', self.path('out', 'scenario.json'), '--config', self.path('config.py'),
            '--theta', '50', '--output', self.path('custom.dskf'))
        self.assertEqual(code, main.EXIT_OK)
        results = load_results(self.path('custom.dskf'))
        self.assertEqual(results.methods(), ['sdskf3'])
        self.assertEqual(results.config['p'], 0.5)
        self.assertEqual(results.config['theta_nAm'], 50.0)

    @defer.inlineCallbacks
    def test_sweep(self):
        yield self.__run_main('simulate', '--output', self.path('out'), *_SMALL)
        code = yield self.__run_main('sweep', self.path('out'), '--param', 'p', '--values', '0.5', '1.0',
            '--method', 'skf', '--calibrate', '--output', self.path('sweep.csv'))
        self.assertEqual(code, main.EXIT_OK)
        header, rows = read_table(self.path('sweep.csv'))
        self.assertEqual(header, ['p', 'mean_error', 'q10', 'q90', 'realizations'])
        self.assertEqual([row[0] for row in rows], ['0.5', '1.0'])
        self.assertEqual([row[4] for row in rows], ['2', '2'])

    @defer.inlineCallbacks
    def test_create_config(self):
        code = yield self.__run_main('simulate', '--create-config', self.path('config.py'))
        self.assertEqual(code, main.EXIT_OK)
        self.assertTrue(os.path.exists(self.path('config.py')))
        code = yield self.__run_main('simulate', '--create-config', self.path('config.py'))
        self.assertEqual(code, main.EXIT_USAGE)

    @defer.inlineCallbacks
    def test_usage_errors(self):
        code = yield self.__run_main('frobnicate')
        self.assertEqual(code, main.EXIT_USAGE)
        code = yield self.__run_main('run', self.path('out'), '--phi', '5=1')
        self.assertEqual(code, main.EXIT_USAGE)
        code = yield self.__run_main('run', self.path('out'), '--phi', 'nonsense')
        self.assertEqual(code, main.EXIT_USAGE)
        code = yield self.__run_main('simulate', '--output', self.path('out'), '--variant', 'upside_down')
        self.assertEqual(code, main.EXIT_USAGE)

    @defer.inlineCallbacks
    def test_io_errors(self):
        code = yield self.__run_main('run', self.path('absent', 'scenario.json'))
        self.assertEqual(code, main.EXIT_IO)
        with open(self.path('garbage.dskf'), 'wb') as f:
            f.write(b'not a results container')
        code = yield self.__run_main('evaluate', self.path('garbage.dskf'))
        self.assertEqual(code, main.EXIT_IO)

    def test_run_plan(self):
        from dskf.config import Config
        os.mkdir(self.path('exp'))
        config_obj = Config()
        config_obj.set_methods('dskf3')
        config_obj.set_parallelism(3)
        plan = main.make_run_plan(self.path('exp'), config_obj)
        self.assertEqual(plan.scenario_path, self.path('exp', 'scenario.json'))
        self.assertEqual(plan.results_path, self.path('exp', 'results.dskf'))
        self.assertEqual(plan.methods, ('dskf3',))
        self.assertEqual(plan.parallelism, 3)
        self.assertEqual(main.make_run_plan(self.path('exp'), config_obj, 'r.dskf').results_path, 'r.dskf')
