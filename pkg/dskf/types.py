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
Value types for configuration and command-line parameters.

A ValueType is called with a specimen and returns the coerced value or raises ValueError; dskf.config turns those ValueErrors into ConfigExceptions naming the parameter.
"""

from __future__ import absolute_import, division

from zope.interface import implementer

from dskf.i.json import IJsonSerializable
from dskf import units


__all__ = []  # appended later


@implementer(IJsonSerializable)
class ValueType(object):
    """A type in the sense of "set of (permitted) values", plus coercion.

    Conventionally, concrete subclasses of ValueType are named like "RangeT" and their instances like "rangeT", to keep classes of types apart from values of those types.
    """

    def to_json(self):
        """See IJsonSerializable."""
        raise NotImplementedError()

    def __call__(self, specimen):
        """
        Coerce the specimen to this type.

        If the specimen is not of a suitable type, raise TypeError or ValueError.

        If the specimen is of a suitable type but out of range, raise ValueError.
        """
        raise NotImplementedError()


__all__.append('ValueType')


class EnumT(ValueType):
    """Type which accepts any of a fixed set of string values.

    values: dict of {value: short description}.
    """
    def __init__(self, values):
        self.__table = {str(key): str(info) for key, info in values.items()}

    def get_table(self):
        return dict(self.__table)

    def to_json(self):
        return {
            'type': 'EnumT',
            'table': self.__table,
        }

    def __call__(self, specimen):
        specimen = str(specimen)
        if specimen not in self.__table:
            raise ValueError('Not a permitted value: %r (expected one of %s)' % (specimen, ', '.join(sorted(self.__table))))
        return specimen


__all__.append('EnumT')


class RangeT(ValueType):
    """Type for an integer or float value within a (possibly half-open) interval.

    Unlike a display range, out-of-range values are rejected, not clamped: these values feed the estimator, where silently moving a parameter would change the experiment.
    """
    def __init__(self, min_value=None, max_value=None, unit=units.none, integer=False, min_exclusive=False):
        """
        min_value, max_value: inclusive bounds, or None for unbounded.
        min_exclusive: if true the lower bound itself is not permitted (for strictly positive quantities).
        integer: whether the value must be integral; it is returned as int.
        """
        assert isinstance(unit, units.Unit)
        self.__min = min_value
        self.__max = max_value
        self.__unit = unit
        self.__integer = integer
        self.__min_exclusive = min_exclusive

    def to_json(self):
        return {
            'type': 'RangeT',
            'min': self.__min,
            'max': self.__max,
            'min_exclusive': self.__min_exclusive,
            'unit': self.__unit,
            'integer': self.__integer,
        }

    def get_unit(self):
        return self.__unit

    def __call__(self, specimen):
        if isinstance(specimen, bool):
            raise ValueError('Expected a number, not a boolean')
        if self.__integer:
            value = float(specimen)
            if value != int(value):
                raise ValueError('Expected an integer: %r' % (specimen,))
            value = int(value)
        else:
            value = float(specimen)
        if value != value:
            raise ValueError('NaN is not permitted')
        if self.__min is not None:
            if self.__min_exclusive and not value > self.__min:
                raise ValueError('%r%s is not greater than %r' % (value, self.__unit, self.__min))
            elif value < self.__min:
                raise ValueError('%r%s is less than %r' % (value, self.__unit, self.__min))
        if self.__max is not None and value > self.__max:
            raise ValueError('%r%s is greater than %r' % (value, self.__unit, self.__max))
        return value

    def __repr__(self):
        return '{0}({1!r}, {2!r}, unit={3}, integer={4!r}, min_exclusive={5!r})'.format(
            type(self).__name__,
            self.__min,
            self.__max,
            self.__unit.symbol or 'none',
            self.__integer,
            self.__min_exclusive)


__all__.append('RangeT')


positive = RangeT(0.0, min_exclusive=True)
nonnegative = RangeT(0.0)

__all__ += ['positive', 'nonnegative']
