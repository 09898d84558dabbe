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
Exception types shared by the estimation, simulation and file modules.

Configuration errors live in dskf.config (ConfigException) since that is where the configuration is interpreted.
"""

from __future__ import absolute_import, division


__all__ = []  # appended later


class DSKFException(Exception):
    """Base for all errors raised deliberately by this package."""


__all__.append('DSKFException')


class ParameterException(DSKFException, ValueError):
    """A numeric parameter (order, time step, variance, exponent, size) is outside its permitted range."""


__all__.append('ParameterException')


class ShapeException(DSKFException, ValueError):
    """Array dimensions or series lengths do not agree."""


__all__.append('ShapeException')


class NumericalException(DSKFException, ArithmeticError):
    """A factorization or matrix function failed.

    step is the zero-based filter step at which it happened, or None if it did not happen inside a recursion.
    """
    def __init__(self, message, step=None):
        super(NumericalException, self).__init__(message)
        self.step = step

    def at_step(self, step):
        """Return a copy of this exception tagged with the given step index."""
        if self.step is not None:
            return self
        return type(self)(str(self), step=step)

    def __str__(self):
        message = super(NumericalException, self).__str__()
        if self.step is None:
            return message
        return 'step %d: %s' % (self.step, message)


__all__.append('NumericalException')


class DegenerateStepException(NumericalException):
    """The standardization normalizer was entirely zero, so no weighting is defined."""


__all__.append('DegenerateStepException')


class DegenerateInputException(DSKFException, ValueError):
    """An input has no energy (zero norm or zero power) where a normalization needs some."""


__all__.append('DegenerateInputException')


class FormatException(DSKFException):
    """A file could not be parsed.

    offset is the byte offset (binary files) or line number (text files) where the problem was noticed, if known.
    """
    def __init__(self, message, offset=None):
        super(FormatException, self).__init__(message)
        self.offset = offset

    def __str__(self):
        message = super(FormatException, self).__str__()
        if self.offset is None:
            return message
        return '%s (at offset %d)' % (message, self.offset)


__all__.append('FormatException')


class VersionException(FormatException):
    """A file declares a format version this code does not read."""


__all__.append('VersionException')


class ChecksumException(FormatException):
    """A file's stored checksum does not match its contents."""


__all__.append('ChecksumException')
