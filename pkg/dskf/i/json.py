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

"""Canonical JSON serialization for scenario files, container headers and summaries."""

from __future__ import absolute_import, division

import json

import numpy as np
from zope.interface import Interface


class IJsonSerializable(Interface):
    """Value objects which can be serialized as JSON structures.

    Only immutable value objects (scenarios, source specs, units) should implement this interface.
    """
    def to_json():
        """Return a JSON representation of this object.

        The representation should be a JSON object (dict) which has a key 'type' whose value is a string identifying the class being represented.
        """


# Keys sorted and separators fixed so that identical structures give identical bytes; files written from these are compared byte-for-byte.
_json_encoder_compact = json.JSONEncoder(
    ensure_ascii=False,
    check_circular=False,
    allow_nan=False,
    sort_keys=True,
    separators=(',', ':'))

_json_encoder_readable = json.JSONEncoder(
    ensure_ascii=False,
    check_circular=False,
    allow_nan=False,
    sort_keys=True,
    indent=2,
    separators=(',', ': '))


def serialize(obj):
    """JSON-encode obj compactly and deterministically."""
    return _json_encoder_compact.encode(transform_for_json(obj))


def serialize_readable(obj):
    """JSON-encode obj deterministically with indentation, for files people edit."""
    return _json_encoder_readable.encode(transform_for_json(obj)) + '\n'


def transform_for_json(obj):
    """Replaces serializable objects in a data structure with JSON-compatible representations.

    Use serialize() to produce a JSON string instead of this, unless this is what you need."""
    # Cannot implement this using the default hook in JSONEncoder because we want to override the behavior for namedtuples (normally treated as tuples), which cannot be done otherwise.
    if IJsonSerializable.providedBy(obj):
        return transform_for_json(obj.to_json())
    elif isinstance(obj, tuple) and hasattr(obj, '_asdict'):  # namedtuple
        return {k: transform_for_json(v) for k, v in obj._asdict().items()}
    elif isinstance(obj, dict):
        return {str(k): transform_for_json(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [transform_for_json(v) for v in obj]
    elif isinstance(obj, np.ndarray):
        return transform_for_json(obj.tolist())
    elif isinstance(obj, np.bool_):
        return bool(obj)
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    else:
        return obj
