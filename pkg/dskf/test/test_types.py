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

from twisted.trial import unittest

from dskf.types import EnumT, RangeT, nonnegative, positive
from dskf import units


def _testType(self, type_obj, good, bad):
    for case in good:
        if isinstance(case, tuple):
            input_value, output_value = case
        else:
            input_value = case
            output_value = case
        self.assertEqual(type_obj(input_value), output_value, msg='for input %r' % (input_value,))
    for value in bad:
        # pylint: disable=cell-var-from-loop
        self.assertRaises(ValueError, lambda: type_obj(value))


class TestEnumT(unittest.TestCase):
    longMessage = True

    def test_run(self):
        _testType(self,
            EnumT({'skf': 'a', 'dskf3': 'b'}),
            ['skf', 'dskf3'],
            ['kf', 'SKF', 999])

    def test_table(self):
        self.assertEqual(EnumT({'a': 'adesc'}).get_table(), {'a': 'adesc'})

    def test_serial(self):
        self.assertEqual(EnumT({'a': 'adesc'}).to_json(), {'type': 'EnumT', 'table': {'a': 'adesc'}})


class TestRangeT(unittest.TestCase):
    longMessage = True

    def test_closed(self):
        _testType(self,
            RangeT(1, 3),
            [1, 2, 3, (2.5, 2.5), ('2', 2.0)],
            [0, 3.5, float('nan'), 'x', True])

    def test_unbounded(self):
        _testType(self,
            RangeT(),
            [-1e300, 0, 1e300],
            [float('nan')])

    def test_integer(self):
        _testType(self,
            RangeT(1, integer=True),
            [1, (2.0, 2), ('40', 40)],
            [0, 1.5])
        self.assertIsInstance(RangeT(1, integer=True)(2.0), int)

    def test_min_exclusive(self):
        _testType(self,
            positive,
            [1e-300, 1],
            [0, -1])
        _testType(self,
            nonnegative,
            [0, 1],
            [-1e-300])

    def test_serial(self):
        self.assertEqual(RangeT(0.0, 1.0, unit=units.ms).to_json(), {
            'type': 'RangeT',
            'min': 0.0,
            'max': 1.0,
            'min_exclusive': False,
            'unit': units.ms,
            'integer': False,
        })

    def test_repr(self):
        self.assertEqual(repr(RangeT(1, 2, unit=units.ms, integer=True)), 'RangeT(1, 2, unit=ms, integer=True, min_exclusive=False)')
        self.assertEqual(repr(RangeT(0.0, min_exclusive=True)), 'RangeT(0.0, None, unit=none, integer=False, min_exclusive=True)')


class TestUnits(unittest.TestCase):
    def test_key(self):
        self.assertEqual(units.ms.key('t_peak'), 't_peak_ms')
        self.assertEqual(units.none.key('n_steps'), 'n_steps')
        self.assertEqual(units.Hz.key('oversample'), 'oversample_hz')

    def test_to_si(self):
        self.assertAlmostEqual(3.0 * units.ms.to_si, 3e-3, delta=1e-18)
        self.assertEqual(units.s.to_si, 1.0)

    def test_serial(self):
        self.assertEqual(units.dB.to_json(), {'type': 'Unit', 'symbol': 'dB', 'key_suffix': 'db'})
