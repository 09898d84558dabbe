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
Execution of the method x SNR x realization grid on a bounded thread pool.

Work is dispatched per (method, SNR) group: the gain schedule does not depend on the observations, so a group computes it once and then filters its realizations one after another. Every cell is isolated; a failure is recorded on the cell and does not affect any other.
"""

from __future__ import absolute_import, division

import logging
import time
from collections import namedtuple

from twisted.internet import defer, threads
from twisted.python import log
from twisted.python.threadpool import ThreadPool

from dskf.errors import DSKFException
from dskf.filter import argmax_diagnostics, method_model, method_schedule, run_method


__all__ = []  # appended later


CellOutcome = namedtuple('CellOutcome', [
    'method',
    'snr_db',
    'realization',
    'z',  # None on failure
    'argmax',  # None on failure
    'error',  # None on success, else the exception text
])

__all__.append('CellOutcome')


GroupTask = namedtuple('GroupTask', [
    'method',
    'snr_db',
    'noise_variance',  # R = noise_variance I for the filter
    'recordings',  # Recordings of this SNR level, realization order
])

__all__.append('GroupTask')


def _failed(task, recording, error):
    log.msg('cell %s %r dB #%d failed: %s' % (task.method, task.snr_db, recording.realization, error), logLevel=logging.WARNING)
    return CellOutcome(task.method, task.snr_db, recording.realization, None, None, str(error))


def run_group(task, leadfield, dt, filter_config, phi_by_order, verbose_results=False):
    """Run every realization of one (method, SNR) group. Never raises DSKFException; failures land in the outcomes."""
    n_steps = task.recordings[0].y.shape[0] if task.recordings else 0
    try:
        model = method_model(task.method, leadfield, dt, phi_by_order, task.noise_variance)
        schedule = method_schedule(task.method, model, filter_config, n_steps)
    except DSKFException as e:
        return [_failed(task, recording, e) for recording in task.recordings]
    outcomes = []
    for recording in task.recordings:
        log.msg('cell %s %r dB #%d started' % (task.method, task.snr_db, recording.realization))
        start = time.perf_counter()
        try:
            z = run_method(task.method, schedule, recording.y, activity_only=not verbose_results)
            argmax = argmax_diagnostics(model.activity_block(z))
        except DSKFException as e:
            outcomes.append(_failed(task, recording, e))
            continue
        log.msg('cell %s %r dB #%d done in %.3f s' % (task.method, task.snr_db, recording.realization, time.perf_counter() - start))
        outcomes.append(CellOutcome(task.method, task.snr_db, recording.realization, z, argmax, None))
    return outcomes


__all__.append('run_group')


@defer.inlineCallbacks
def run_grid(reactor, tasks, workers, run=run_group, **kwargs):
    """
    Run tasks on at most `workers` threads and return all CellOutcomes, in task order.

    run(task, **kwargs) is called in a pool thread for each task and returns a list of outcomes; an outcome whose `error` is not None counts as failed.
    """
    pool = ThreadPool(minthreads=0, maxthreads=max(1, int(workers)), name='dskf-grid')
    pool.start()
    start = time.perf_counter()
    try:
        results = yield defer.gatherResults(
            [threads.deferToThreadPool(reactor, pool, run, task, **kwargs) for task in tasks],
            consumeErrors=True)
    except defer.FirstError as e:
        e.subFailure.raiseException()
    finally:
        pool.stop()
    outcomes = [outcome for group in results for outcome in group]
    failures = sum(1 for outcome in outcomes if getattr(outcome, 'error', None) is not None)
    log.msg('grid: %d cells in %d groups, %d failed, %.2f s on %d workers' % (
        len(outcomes), len(tasks), failures, time.perf_counter() - start, workers))
    defer.returnValue(outcomes)


__all__.append('run_grid')
