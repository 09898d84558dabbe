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
Startup check that the libraries DSKF needs are importable and recent enough.

Run before anything heavier is imported, so a broken install yields one readable report instead of a traceback.
"""

from __future__ import absolute_import, division

import re
from importlib import import_module


__all__ = []  # appended later


_MISSING = 'missing'
_BROKEN = 'not installed correctly'
_OLD = 'too old'
_ORDER = (_MISSING, _BROKEN, _OLD)


def _version_tuple(text):
    """Leading numeric components of a version string: '1.26.4rc1' -> (1, 26, 4)."""
    parts = []
    for piece in str(text).split('.'):
        match = re.match(r'\d+', piece)
        if not match:
            break
        parts.append(int(match.group()))
    return tuple(parts)


class DependencyTester(object):
    """Collects problems found by the check_* methods; report() formats them."""

    def __init__(self):
        self.__problems = {kind: set() for kind in _ORDER}

    def __note(self, kind, dep_name, check):
        self.__problems[kind].add((dep_name, check))

    def check_module(self, module_name, dep_name):
        """Import module_name and return it, or None after noting why it failed."""
        # pylint: disable=broad-except
        try:
            return import_module(module_name)
        except ImportError as e:
            # e.name is the module that could not be found; if it is not ours (or a parent), the failure is inside the library
            if e.name is not None and module_name.startswith(e.name):
                self.__note(_MISSING, dep_name, '%s not present.' % module_name)
            else:
                self.__note(_BROKEN, dep_name, '%s failed to import (%s).' % (module_name, e))
        except Exception as e:
            self.__note(_BROKEN, dep_name, '%s failed to import (%s).' % (module_name, e))
        return None

    def check_module_attr(self, module_name, dep_name, attr_path):
        """Like check_module, and also require the dotted attr_path; its absence means the library is too old."""
        module = self.check_module(module_name, dep_name)
        if module is not None and not hasattr_path(module, attr_path):
            self.__note(_OLD, dep_name, '%s.%s not present.' % (module_name, attr_path))

    def check_min_version(self, module_name, dep_name, minimum):
        """Like check_module, and also require module.__version__ >= minimum (a tuple of ints)."""
        module = self.check_module(module_name, dep_name)
        if module is None:
            return
        found = _version_tuple(getattr(module, '__version__', ''))
        if found < tuple(minimum):
            self.__note(_OLD, dep_name, '%s %s found, %s needed.' % (
                module_name,
                getattr(module, '__version__', 'of unknown version'),
                '.'.join(str(v) for v in minimum)))

    def report(self):
        """Human-readable report, or None if every check passed."""
        sections = []
        for kind in _ORDER:
            if self.__problems[kind]:
                sections.append('The following libraries are %s:\n' % kind + ''.join(
                    '\t%s  (Check: %s)\n' % entry for entry in sorted(self.__problems[kind])))
        if not sections:
            return None
        return ''.join(sections) + 'Please (re)install current versions.'


__all__.append('DependencyTester')


def hasattr_path(specimen, path):
    first, _, rest = path.partition('.')
    if not hasattr(specimen, first):
        return False
    return not rest or hasattr_path(getattr(specimen, first), rest)


__all__.append('hasattr_path')
