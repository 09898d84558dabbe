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
File formats for lead fields, scenarios, recordings, result containers and metric tables.

Binary formats are little-endian with a per-type 8-byte magic string; floats are IEEE 754 doubles. Text formats write floats with repr(), which round-trips exactly.

Readers may run concurrently; a path must have a single writer at a time.
"""

from __future__ import absolute_import, division

import contextlib
import csv
import hashlib
import json
import os
import os.path
import struct
from collections import namedtuple

import numpy as np
from twisted.python import log

from dskf.config import ConfigException
from dskf.errors import ChecksumException, DegenerateInputException, FormatException, VersionException
from dskf.i.json import serialize, serialize_readable
from dskf.simulate import Recording, Scenario, synth_leadfield
from dskf.statespace import LeadField


__all__ = []  # appended later


LEADFIELD_MAGIC = b'DSKF-LF1'
RECORDING_MAGIC = b'DSKF-RE1'
RESULTS_MAGIC = b'DSKF-RC1'
RESULTS_VERSION = 1

_FLOAT = np.dtype('<f8')
_LEADFIELD_HEADER = struct.Struct('<8sII')  # magic, m, n
_RECORDING_HEADER = struct.Struct('<8sIIddQI')  # magic, T, m, noise sigma, snr dB, seed, realization
_RESULTS_PREAMBLE = struct.Struct('<8sI32sQ')  # magic, version, sha256 of the rest, header length

__all__ += ['LEADFIELD_MAGIC', 'RECORDING_MAGIC', 'RESULTS_MAGIC', 'RESULTS_VERSION']


@contextlib.contextmanager
def _atomic_open_for_write(name, mode):
    newname = name + '.new'
    if os.path.exists(newname):
        raise IOError('Unexpected new file: %s' % newname)
    ok = False
    f = open(newname, mode, **({} if 'b' in mode else {'newline': '', 'encoding': 'utf-8'}))
    try:
        yield f
        ok = True
    finally:
        f.close()
        if ok:
            os.replace(newname, name)
            log.msg('Wrote %s' % (name,))
        else:
            os.remove(newname)
            log.msg('Not installing new-version due to error: %s' % newname)


def _read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


def _check_magic(data, magic, what):
    if data[:len(magic)] != magic:
        raise FormatException('not a %s file (bad magic %r)' % (what, data[:len(magic)]), offset=0)


def _floats(data, offset, count, what):
    end = offset + count * _FLOAT.itemsize
    if end > len(data):
        raise FormatException('%s truncated: need %d bytes, have %d' % (what, end, len(data)), offset=len(data))
    return np.frombuffer(data, dtype=_FLOAT, count=count, offset=offset).astype(np.float64), end


def _is_csv(path):
    return path.lower().endswith('.csv')


def _float_text(value):
    return repr(float(value))


# --- lead fields ---


def save_leadfield(path, leadfield):
    """Write a lead field; paths ending in .csv get the text form, anything else the binary form."""
    if _is_csv(path):
        with _atomic_open_for_write(path, 'w') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow([leadfield.electrode_count, leadfield.source_count])
            for row in leadfield.matrix:
                writer.writerow([_float_text(v) for v in row])
            for row in leadfield.positions:
                writer.writerow([_float_text(v) for v in row])
    else:
        with _atomic_open_for_write(path, 'wb') as f:
            f.write(_LEADFIELD_HEADER.pack(LEADFIELD_MAGIC, leadfield.electrode_count, leadfield.source_count))
            f.write(np.ascontiguousarray(leadfield.matrix, dtype=_FLOAT).tobytes())
            f.write(np.ascontiguousarray(leadfield.positions, dtype=_FLOAT).tobytes())


__all__.append('save_leadfield')


def load_leadfield(path):
    if _is_csv(path):
        return _load_leadfield_csv(path)
    data = _read_bytes(path)
    if len(data) < _LEADFIELD_HEADER.size:
        raise FormatException('lead field file too short for its header', offset=len(data))
    _check_magic(data, LEADFIELD_MAGIC, 'lead field')
    _, m, n = _LEADFIELD_HEADER.unpack_from(data)
    matrix, offset = _floats(data, _LEADFIELD_HEADER.size, m * n, 'lead field matrix')
    positions, offset = _floats(data, offset, n * 3, 'source positions')
    if offset != len(data):
        raise FormatException('%d unexpected trailing bytes after %dx%d lead field' % (len(data) - offset, m, n), offset=offset)
    return LeadField(matrix.reshape(m, n), positions.reshape(n, 3))


__all__.append('load_leadfield')


def _load_leadfield_csv(path):
    with open(path, newline='', encoding='utf-8') as f:
        rows = [row for row in csv.reader(f) if row]
    if not rows:
        raise FormatException('empty lead field file', offset=1)
    try:
        m, n = [int(v) for v in rows[0]]
    except ValueError:
        raise FormatException('first line must be "m,n"', offset=1)
    if len(rows) != 1 + m + n:
        raise FormatException('header declares %dx%d, expecting %d lines but found %d' % (m, n, 1 + m + n, len(rows)), offset=len(rows))

    def block(start, count, width):
        out = np.empty((count, width))
        for i in range(count):
            line = start + i
            row = rows[line]
            if len(row) != width:
                raise FormatException('expected %d values, found %d' % (width, len(row)), offset=line + 1)
            try:
                out[i] = [float(v) for v in row]
            except ValueError:
                raise FormatException('not a number', offset=line + 1)
        return out

    return LeadField(block(1, m, n), block(1 + m, n, 3))


# --- scenarios ---


def save_scenario(path, scenario):
    with _atomic_open_for_write(path, 'w') as f:
        f.write(serialize_readable(scenario))


__all__.append('save_scenario')


def load_scenario(path):
    with open(path, encoding='utf-8') as f:
        text = f.read()
    try:
        obj = json.loads(text)
    except ValueError as e:
        raise FormatException('scenario is not valid JSON: %s' % (getattr(e, 'msg', e),), offset=getattr(e, 'pos', None))
    return Scenario.from_json(obj)


__all__.append('load_scenario')


def resolve_leadfield(scenario, scenario_path):
    """Load the lead field a scenario refers to, relative to the scenario file's directory."""
    ref = scenario.leadfield
    if ref.path is None:
        leadfield = synth_leadfield(ref.electrodes, ref.sources, ref.seed, ref.depth_bias)
    else:
        leadfield = load_leadfield(os.path.join(os.path.dirname(scenario_path), ref.path))
    if (leadfield.electrode_count, leadfield.source_count) != (ref.electrodes, ref.sources):
        raise ConfigException('scenario expects a %dx%d lead field, %s is %dx%d' % (
            ref.electrodes, ref.sources, ref.path, leadfield.electrode_count, leadfield.source_count))
    return leadfield


__all__.append('resolve_leadfield')


# --- recordings ---


def recording_filename(snr_db, realization, suffix='.rec'):
    """Stable file name of one recording within a recordings directory."""
    return 'snr%+06.1f_r%03d%s' % (snr_db, realization, suffix)


__all__.append('recording_filename')


def save_recording(path, recording):
    y = np.ascontiguousarray(recording.y, dtype=_FLOAT)
    clean = np.ascontiguousarray(recording.clean, dtype=_FLOAT)
    T, m = y.shape
    with _atomic_open_for_write(path, 'wb') as f:
        f.write(_RECORDING_HEADER.pack(
            RECORDING_MAGIC, T, m, recording.noise_sigma, recording.snr_db, recording.seed, recording.realization))
        f.write(y.tobytes())
        f.write(clean.tobytes())


__all__.append('save_recording')


def load_recording(path):
    data = _read_bytes(path)
    if len(data) < _RECORDING_HEADER.size:
        raise FormatException('recording file too short for its header', offset=len(data))
    _check_magic(data, RECORDING_MAGIC, 'recording')
    _, T, m, sigma, snr_db, seed, realization = _RECORDING_HEADER.unpack_from(data)
    y, offset = _floats(data, _RECORDING_HEADER.size, T * m, 'observations')
    clean, offset = _floats(data, offset, T * m, 'clean signal')
    if offset != len(data):
        raise FormatException('unexpected trailing bytes', offset=offset)
    return Recording(y=y.reshape(T, m), clean=clean.reshape(T, m), noise_sigma=sigma, seed=seed, realization=realization, snr_db=snr_db)


__all__.append('load_recording')


def save_recording_csv(path, recording, dt):
    """Noisy observations as text: columns step, time_ms (step centre), ch0, ch1, ..."""
    T, m = recording.y.shape
    with _atomic_open_for_write(path, 'w') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['step', 'time_ms'] + ['ch%d' % i for i in range(m)])
        for t in range(T):
            writer.writerow([t, _float_text((t + 0.5) * dt * 1e3)] + [_float_text(v) for v in recording.y[t]])


__all__.append('save_recording_csv')


def load_recording_csv(path):
    """Return (times_ms, y) from a file written by save_recording_csv."""
    with open(path, newline='', encoding='utf-8') as f:
        rows = [row for row in csv.reader(f) if row]
    if not rows or rows[0][:2] != ['step', 'time_ms']:
        raise FormatException('missing "step,time_ms,..." header', offset=1)
    width = len(rows[0])
    times = np.empty(len(rows) - 1)
    y = np.empty((len(rows) - 1, width - 2))
    for i, row in enumerate(rows[1:]):
        if len(row) != width or int(row[0]) != i:
            raise FormatException('malformed row', offset=i + 2)
        times[i] = float(row[1])
        y[i] = [float(v) for v in row[2:]]
    return times, y


__all__.append('load_recording_csv')


# --- results ---


RunRecord = namedtuple('RunRecord', [
    'method',
    'snr_db',
    'realization',
    'z',  # T x n activity block (or T x (s+1)n if stored verbose)
    'argmax',  # per-step argmax_j |z_j|
])

__all__.append('RunRecord')


class ResultsContainer(object):
    """
    Output of one `dskf run`: the scenario snapshot, the effective configuration, one RunRecord per completed cell, the failed cells, and the metric tables computed from the runs.
    """
    def __init__(self, scenario, config=None, runs=(), failures=(), tables=None, format_version=RESULTS_VERSION):
        self.format_version = format_version
        self.scenario = scenario
        self.config = dict(config or {})
        self.__runs = {}
        self.failures = list(failures)  # dicts: method, snr_db, realization, error
        self.tables = dict(tables or {})  # table name -> list of rows, as from metric_tables()
        for run in runs:
            self.add_run(run)

    def add_run(self, run):
        key = (run.method, float(run.snr_db), int(run.realization))
        if key in self.__runs:
            raise ValueError('duplicate run %r' % (key,))
        self.__runs[key] = run

    def add_failure(self, method, snr_db, realization, error):
        self.failures.append({'method': method, 'snr_db': float(snr_db), 'realization': realization, 'error': str(error)})

    def keys(self):
        """(method, snr_db, realization) of every run, sorted."""
        return sorted(self.__runs)

    def run(self, method, snr_db, realization):
        return self.__runs[(method, float(snr_db), int(realization))]

    def methods(self):
        return sorted(set(key[0] for key in self.__runs))

    def __len__(self):
        return len(self.__runs)

    def __eq__(self, other):
        if not isinstance(other, ResultsContainer):
            return False
        return (serialize(self.scenario) == serialize(other.scenario) and
            self.config == other.config and
            self.failures == other.failures and
            self.tables == other.tables and
            self.keys() == other.keys() and
            all(np.array_equal(self.run(*k).z, other.run(*k).z) and
                np.array_equal(self.run(*k).argmax, other.run(*k).argmax)
                for k in self.keys()))

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def require_runs(self):
        if not self.__runs:
            raise DegenerateInputException('results container holds no runs; nothing to evaluate')


__all__.append('ResultsContainer')


def save_results(path, container):
    blocks = []
    index = []
    position = 0
    for key in container.keys():
        run = container.run(*key)
        z = np.ascontiguousarray(run.z, dtype=_FLOAT)
        argmax = np.ascontiguousarray(run.argmax, dtype=_FLOAT)
        index.append({
            'method': run.method,
            'snr_db': run.snr_db,
            'realization': run.realization,
            'shape': list(z.shape),
            'z_offset': position,
            'argmax_offset': position + z.size,
        })
        blocks.extend([z.tobytes(), argmax.tobytes()])
        position += z.size + argmax.size
    header = serialize({
        'type': 'ResultsContainer',
        'format_version': container.format_version,
        'scenario': container.scenario,
        'config': container.config,
        'runs': index,
        'failures': container.failures,
        'tables': container.tables,
    }).encode('utf-8')
    payload = header + b''.join(blocks)
    digest = hashlib.sha256(payload).digest()
    with _atomic_open_for_write(path, 'wb') as f:
        f.write(_RESULTS_PREAMBLE.pack(RESULTS_MAGIC, container.format_version, digest, len(header)))
        f.write(payload)


__all__.append('save_results')


def load_results(path):
    data = _read_bytes(path)
    if len(data) < _RESULTS_PREAMBLE.size:
        raise FormatException('results file too short for its preamble', offset=len(data))
    _check_magic(data, RESULTS_MAGIC, 'results container')
    _, version, digest, header_length = _RESULTS_PREAMBLE.unpack_from(data)
    if version != RESULTS_VERSION:
        raise VersionException(
            'results container format version %d is not supported; this build reads version %d' % (version, RESULTS_VERSION),
            offset=8)
    payload = data[_RESULTS_PREAMBLE.size:]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumException('results container checksum mismatch; the file is corrupted', offset=12)
    if header_length > len(payload):
        raise FormatException('header length exceeds file size', offset=_RESULTS_PREAMBLE.size - 8)
    try:
        header = json.loads(payload[:header_length].decode('utf-8'))
    except ValueError as e:
        raise FormatException('results header is not valid JSON: %s' % (e,), offset=_RESULTS_PREAMBLE.size)
    log.msg('Loading results container version %d from %s' % (version, path))
    base = _RESULTS_PREAMBLE.size + header_length
    container = ResultsContainer(
        scenario=Scenario.from_json(header['scenario']),
        config=header['config'],
        failures=header['failures'],
        tables=header['tables'],
        format_version=version)
    for entry in header['runs']:
        T, k = entry['shape']
        z, _ = _floats(data, base + entry['z_offset'] * _FLOAT.itemsize, T * k, 'run block')
        argmax, _ = _floats(data, base + entry['argmax_offset'] * _FLOAT.itemsize, T, 'argmax block')
        container.add_run(RunRecord(
            method=entry['method'],
            snr_db=entry['snr_db'],
            realization=entry['realization'],
            z=z.reshape(T, k),
            argmax=argmax.astype(np.int64)))
    return container


__all__.append('load_results')


# --- tables ---


def _cell_text(value):
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return _float_text(value)
    return str(value)


def write_table(path, header, rows):
    """CSV with a header line; None is written as an empty field (a gap) and floats with repr()."""
    with _atomic_open_for_write(path, 'w') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell_text(v) for v in row])


__all__.append('write_table')


def read_table(path):
    """Return (header, rows) of a CSV file, all fields as strings."""
    with open(path, newline='', encoding='utf-8') as f:
        rows = list(csv.reader(f))
    if not rows:
        raise FormatException('empty table', offset=1)
    return rows[0], rows[1:]


__all__.append('read_table')


def write_summary(path, obj):
    with _atomic_open_for_write(path, 'w') as f:
        f.write(serialize_readable(obj))


__all__.append('write_summary')


def read_summary(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


__all__.append('read_summary')
