# -*- coding: utf-8 -*-
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
Minimal units library.

Used for naming keys in scenario files and column headers, and for converting the millisecond and nanoampere-metre values people write into the SI seconds the state-space code uses. Does not provide dimensional analysis.
"""

from __future__ import absolute_import, division, unicode_literals

from collections import namedtuple as _namedtuple

from zope.interface import implementer as _implementer

from dskf.i.json import IJsonSerializable as _IJsonSerializable


__all__ = []  # appended later


@_implementer(_IJsonSerializable)
class Unit(_namedtuple('Unit', [
        'symbol',
        'key_suffix',  # appended to field names in files, e.g. t_peak_ms
        'to_si'])):  # multiply by this to get the SI (or base) quantity

    def to_json(self):
        return {
            'type': 'Unit',
            'symbol': self.symbol,
            'key_suffix': self.key_suffix,
        }

    def key(self, name):
        """Return the file key for a field of this unit, e.g. s.key('duration') == 'duration_s'."""
        if not self.key_suffix:
            return name
        return '%s_%s' % (name, self.key_suffix)

    def __str__(self):
        return self.symbol


__all__.append('Unit')


none = Unit('', '', 1.0)
s = Unit('s', 's', 1.0)
ms = Unit('ms', 'ms', 1e-3)
Hz = Unit('Hz', 'hz', 1.0)
dB = Unit('dB', 'db', 1.0)
nAm = Unit('nA·m', 'nAm', 1.0)  # internal amplitude unit; SI would be 1e-9
mm = Unit('mm', 'mm', 1.0)

__all__ += ['none', 's', 'ms', 'Hz', 'dB', 'nAm', 'mm']
