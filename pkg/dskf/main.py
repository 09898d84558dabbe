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
Command-line entry point: dskf simulate | run | evaluate | sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 partial numerical failure, 3 I/O or file-format error.
"""

from __future__ import absolute_import, division, print_function

import argparse
import hashlib
import logging
import os
import os.path
import sys
from collections import namedtuple

from twisted.internet import defer
from twisted.internet import reactor as singleton_reactor
from twisted.internet.task import react
from twisted.python import log

from dskf.i.dependencies import DependencyTester


__all__ = []  # appended later


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

SCENARIO_FILENAME = 'scenario.json'
LEADFIELD_FILENAME = 'leadfield.lf'
RECORDINGS_DIRNAME = 'recordings'
RESULTS_FILENAME = 'results.dskf'
EVALUATION_DIRNAME = 'evaluation'
MANIFEST_FILENAME = 'manifest.txt'

__all__ += ['EXIT_OK', 'EXIT_USAGE', 'EXIT_NUMERICAL', 'EXIT_IO']


def main(argv=None, _abort_for_test=False):
    # This function is referenced by the setup.py entry point definition as well as the name=__main__ test below.
    def go(reactor):
        d = _main_async(reactor, argv, _abort_for_test)
        if not _abort_for_test:
            d.addCallback(_exit_with)
        return d

    if _abort_for_test:
        # returns a Deferred firing with the exit code
        return go(singleton_reactor)
    else:
        react(go)


__all__.append('main')


def _exit_with(code):
    if code:
        raise SystemExit(code)


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _make_parser(prog):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH',
        help='configuration file (Python, see --create-config); command-line flags override it')
    common.add_argument('-v', '--verbose', action='store_true',
        help='log debugging detail')
    common.add_argument('-q', '--quiet', action='store_true',
        help='log warnings and errors only')
    common.add_argument('--workers', type=int, metavar='N',
        help='grid cells computed concurrently (default: CPU count)')

    filter_flags = argparse.ArgumentParser(add_help=False)
    filter_flags.add_argument('--p', type=float, metavar='P',
        help='standardization exponent (default 1.0)')
    filter_flags.add_argument('--theta', type=float, metavar='NAM2',
        help='initial covariance scale in nA*m^2 (default 100)')
    filter_flags.add_argument('--phi', action='append', default=[], metavar='ORDER=VALUE',
        help='process-noise variance of the kinematic model of ORDER (0, 1 or 2); repeatable')
    filter_flags.add_argument('--diag-floor', type=float, metavar='REL',
        help='relative floor on the standardization normalizer (default 1e-12)')
    filter_flags.add_argument('--noise-mismatch', type=float, metavar='FACTOR',
        help='ratio of the assumed to the simulated noise standard deviation (default 1)')
    filter_flags.add_argument('--time-unit', choices=['step', 'second'],
        help='unit of the kinematic time step; phi is expressed in it (default step)')

    parser = _ArgumentParser(prog=os.path.basename(prog),
        description='Dynamical standardized Kalman filtering of synthetic EEG.')
    commands = parser.add_subparsers(dest='command_name', metavar='COMMAND', parser_class=_ArgumentParser)
    commands.required = True

    simulate = commands.add_parser('simulate', parents=[common],
        help='generate a scenario, its lead field and noisy recordings')
    simulate.set_defaults(command=_cmd_simulate)
    simulate.add_argument('--create-config', metavar='PATH',
        help='write a template configuration file to PATH and exit')
    simulate.add_argument('--variant', default='default', metavar='NAME',
        help='default, inverted, single_source or visual')
    simulate.add_argument('--seed', type=int, default=0,
        help='base seed for the lead field and the noise (non-negative integer)')
    simulate.add_argument('--realizations', type=int, default=20, metavar='N',
        help='noise realizations per SNR level (default 20)')
    simulate.add_argument('--snr', type=float, nargs='+', default=[30.0, 20.0, 10.0], metavar='DB',
        help='SNR levels in dB (default 30 20 10)')
    simulate.add_argument('--leadfield', metavar='PATH',
        help='use this lead field (.csv or binary) instead of synthesizing one')
    simulate.add_argument('--electrodes', type=int, default=32, metavar='M',
        help='electrodes of the synthetic lead field (default 32)')
    simulate.add_argument('--sources', type=int, default=200, metavar='N',
        help='sources of the synthetic lead field (default 200)')
    simulate.add_argument('--depth-bias', type=float, default=1.0, metavar='BETA',
        help='depth-bias exponent of the synthetic lead field (default 1)')
    simulate.add_argument('--deep-index', type=int, metavar='J', help='deep (thalamic) source column')
    simulate.add_argument('--superficial-index', type=int, metavar='J', help='superficial (somatosensory) source column')
    simulate.add_argument('--visual-index', type=int, metavar='J', help='alternate superficial source column for --variant visual')
    simulate.add_argument('--oversample', type=float, metavar='HZ',
        help='sample the pulses at HZ and average them into filter steps (e.g. 20000)')
    simulate.add_argument('--truth-phi', type=float, metavar='PHI',
        help='add kinematic process-noise activity of this variance to the simulated sources')
    simulate.add_argument('--truth-order', type=int, default=2, metavar='S',
        help='kinematic order of the --truth-phi activity (default 2)')
    simulate.add_argument('--csv', action='store_true',
        help='also write every recording as CSV')
    simulate.add_argument('--output', metavar='DIR',
        help='output directory (default: $DSKF_OUTPUT_ROOT or ./dskf-out)')

    run = commands.add_parser('run', parents=[common, filter_flags],
        help='filter every recording of a scenario with every method')
    run.set_defaults(command=_cmd_run)
    run.add_argument('scenario', metavar='SCENARIO',
        help='scenario file or the directory holding scenario.json')
    run.add_argument('--methods', nargs='+', metavar='METHOD',
        help='skf, sskf, dskf2, dskf3, sdskf2, sdskf3 (default: the first four)')
    run.add_argument('--verbose-results', action='store_true',
        help='store the full standardized state rather than the activity block')
    run.add_argument('--output', metavar='PATH',
        help='results container path (default: results.dskf next to the scenario)')

    evaluate = commands.add_parser('evaluate', parents=[common],
        help='compute metric tables and plots from a results container')
    evaluate.set_defaults(command=_cmd_evaluate)
    evaluate.add_argument('results', metavar='RESULTS', help='results container written by run')
    evaluate.add_argument('--output', metavar='DIR',
        help='output directory (default: evaluation/ next to the results)')

    sweep = commands.add_parser('sweep', parents=[common, filter_flags],
        help='cross-correlation error as a function of p, phi or theta')
    sweep.set_defaults(command=_cmd_sweep)
    sweep.add_argument('scenario', metavar='SCENARIO',
        help='scenario file or the directory holding scenario.json')
    sweep.add_argument('--param', required=True, choices=['p', 'phi', 'theta'])
    sweep.add_argument('--values', required=True, type=float, nargs='+', metavar='X')
    sweep.add_argument('--method', default='dskf3', metavar='METHOD', help='method to sweep (default dskf3)')
    sweep.add_argument('--snr', type=float, metavar='DB',
        help='SNR level to use (default: the scenario\'s first)')
    sweep.add_argument('--calibrate', action='store_true',
        help='print the value with the smallest mean error')
    sweep.add_argument('--output', metavar='PATH',
        help='sweep CSV path (default: next to the scenario)')
    return parser


@defer.inlineCallbacks
def _main_async(reactor, argv=None, _abort_for_test=False):
    if argv is None:
        argv = sys.argv

    parser = _make_parser(argv[0])
    try:
        args = parser.parse_args(args=argv[1:])
    except _UsageError as e:
        parser.print_usage(sys.stderr)
        print('%s: error: %s' % (parser.prog, e), file=sys.stderr)
        defer.returnValue(EXIT_USAGE)
    except SystemExit as e:
        # --help
        defer.returnValue(e.code or EXIT_OK)

    if not _abort_for_test:
        configure_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)

    # Verify we can actually run.
    # Note that this must be done before we actually load core modules, because we might get an import error then.
    version_report = _check_versions()
    if version_report:
        print(version_report, file=sys.stderr)
        defer.returnValue(EXIT_USAGE)

    from dskf.config import ConfigException
    from dskf.errors import DegenerateInputException, FormatException, NumericalException, ParameterException, ShapeException

    log.msg('dskf %s' % (args.command_name,))
    try:
        config_obj = _configure(args)
        code = yield args.command(reactor, args, config_obj)
    except (ConfigException, ParameterException, ShapeException) as e:
        print('%s: %s' % (parser.prog, e), file=sys.stderr)
        code = EXIT_USAGE
    except (NumericalException, DegenerateInputException) as e:
        print('%s: %s' % (parser.prog, e), file=sys.stderr)
        code = EXIT_NUMERICAL
    except (EnvironmentError, FormatException) as e:
        print('%s: %s' % (parser.prog, e), file=sys.stderr)
        code = EXIT_IO
    defer.returnValue(code)


def _check_versions():
    t = DependencyTester()
    t.check_module_attr('twisted.internet.task', 'Python library Twisted', 'react')
    t.check_module_attr('zope.interface', 'Python library zope.interface', 'implementer')
    t.check_min_version('numpy', 'Python library NumPy', (1, 22))
    t.check_module_attr('scipy.linalg', 'Python library SciPy', 'cho_factor')
    t.check_module_attr('matplotlib.figure', 'Python library Matplotlib', 'Figure')
    return t.report()


def configure_logging(level=logging.INFO):
    logging.basicConfig(level=level)
    log.startLoggingWithObserver(log.PythonLoggingObserver(loggerName='dskf').emit, False)


def _configure(args):
    """Build the Config: defaults, then the --config file, then flags."""
    from dskf.config import Config, ConfigException, execute_config

    config_obj = Config()
    if args.config:
        execute_config(config_obj, args.config)
    if getattr(args, 'p', None) is not None or getattr(args, 'theta', None) is not None or getattr(args, 'diag_floor', None) is not None:
        config_obj.set_filter(p=args.p, theta=args.theta, diag_floor=args.diag_floor)
    for assignment in getattr(args, 'phi', []):
        order, sep, value = assignment.partition('=')
        if not sep:
            raise ConfigException('--phi expects ORDER=VALUE, not %r' % (assignment,))
        config_obj.set_phi(order.strip(), value.strip())
    if getattr(args, 'noise_mismatch', None) is not None:
        config_obj.set_noise_mismatch(args.noise_mismatch)
    if getattr(args, 'time_unit', None) is not None:
        config_obj.set_time_unit(args.time_unit)
    if getattr(args, 'methods', None):
        config_obj.set_methods(*args.methods)
    if getattr(args, 'verbose_results', False):
        config_obj.set_verbose_results(True)
    if args.workers is not None:
        config_obj.set_parallelism(args.workers)
    config_obj._finish()
    return config_obj


def _file_sha256(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(directory, paths):
    """
    Write manifest.txt listing "<sha256>  <path relative to directory>" for each path, sorted by path, and return the manifest's own sha256.
    """
    entries = sorted(os.path.relpath(path, directory).replace(os.sep, '/') for path in paths)
    text = ''.join('%s  %s\n' % (_file_sha256(os.path.join(directory, entry)), entry) for entry in entries)
    manifest_path = os.path.join(directory, MANIFEST_FILENAME)
    with open(manifest_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    digest = hashlib.sha256(text.encode('utf-8')).hexdigest()
    log.msg('manifest %s: %s' % (manifest_path, digest))
    return digest


__all__.append('write_manifest')


def _output_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise EnvironmentError(e.errno, 'cannot create output directory %s: %s' % (path, e.strerror))
    return path


# --- simulate ---


def _cmd_simulate(reactor, args, config_obj):
    from dskf.config import ConfigException, write_default_config
    from dskf.io import load_leadfield, recording_filename, save_leadfield, save_recording, save_recording_csv, save_scenario
    from dskf.simulate import LeadFieldRef, VARIANTS, build_tracking_scenario, simulate_recordings, synth_leadfield

    if args.create_config:
        write_default_config(args.create_config)
        log.msg('Created default configuration at: ' + args.create_config)
        return defer.succeed(EXIT_OK)

    if args.variant not in VARIANTS:
        raise ConfigException('unknown variant %r (expected one of %s)' % (args.variant, ', '.join(sorted(VARIANTS))))
    if args.seed < 0:
        raise ConfigException('--seed must be non-negative')
    if args.truth_order not in (1, 2):
        raise ConfigException('--truth-order must be 1 or 2')
    if args.truth_phi is not None and not args.truth_phi > 0:
        raise ConfigException('--truth-phi must be positive')

    if args.leadfield:
        leadfield = load_leadfield(args.leadfield)
        ref = LeadFieldRef(LEADFIELD_FILENAME, leadfield.electrode_count, leadfield.source_count, None, None)
    else:
        leadfield = synth_leadfield(args.electrodes, args.sources, args.seed, args.depth_bias)
        ref = LeadFieldRef(LEADFIELD_FILENAME, args.electrodes, args.sources, args.seed, args.depth_bias)
    scenario = build_tracking_scenario(
        args.variant, leadfield, ref,
        base_seed=args.seed,
        deep_index=args.deep_index,
        superficial_index=args.superficial_index,
        visual_index=args.visual_index,
        n_realizations=args.realizations,
        snr_db=args.snr,
        oversample_hz=args.oversample)
    if args.truth_phi is not None:
        scenario = scenario._replace(truth_phi=args.truth_phi, truth_order=args.truth_order)

    out = _output_dir(args.output or config_obj._output_root())
    recordings_dir = _output_dir(os.path.join(out, RECORDINGS_DIRNAME))
    written = [os.path.join(out, LEADFIELD_FILENAME), os.path.join(out, SCENARIO_FILENAME)]
    save_leadfield(written[0], leadfield)
    save_scenario(written[1], scenario)
    for recording in simulate_recordings(scenario, leadfield):
        path = os.path.join(recordings_dir, recording_filename(recording.snr_db, recording.realization))
        save_recording(path, recording)
        written.append(path)
        if args.csv:
            path = os.path.join(recordings_dir, recording_filename(recording.snr_db, recording.realization, '.csv'))
            save_recording_csv(path, recording, scenario.dt)
            written.append(path)
    log.msg('simulate: %s scenario, %d recordings in %s' % (
        scenario.variant, len(scenario.snr_db) * scenario.n_realizations, out))
    print(write_manifest(out, written))
    return defer.succeed(EXIT_OK)


# --- run ---


_Inputs = namedtuple('_Inputs', ['scenario_path', 'scenario', 'leadfield', 'recordings'])


def _scenario_path(path):
    return os.path.join(path, SCENARIO_FILENAME) if os.path.isdir(path) else path


def _load_inputs(path, snr_levels=None):
    """Scenario, its lead field, and {snr: [Recording]} for the requested SNR levels (default all)."""
    from dskf.io import load_recording, load_scenario, recording_filename, resolve_leadfield

    path = _scenario_path(path)
    scenario = load_scenario(path)
    leadfield = resolve_leadfield(scenario, path)
    recordings_dir = os.path.join(os.path.dirname(path), RECORDINGS_DIRNAME)
    recordings = {}
    for snr in (scenario.snr_db if snr_levels is None else snr_levels):
        recordings[snr] = [
            load_recording(os.path.join(recordings_dir, recording_filename(snr, r)))
            for r in range(scenario.n_realizations)]
    return _Inputs(path, scenario, leadfield, recordings)


def _nominal_noise_variance(inputs, snr_db, mismatch):
    """Variance the filter assumes: that of the noise added to the pulse-only signal, scaled by mismatch^2."""
    from dskf.simulate import noise_sigma, simulate_clean

    scenario = inputs.scenario
    clean = simulate_clean(inputs.leadfield, scenario.sources, scenario.duration, scenario.n_steps, scenario.oversample_hz)
    return (noise_sigma(clean, snr_db) * mismatch) ** 2


RunPlan = namedtuple('RunPlan', [
    'scenario_path',
    'methods',
    'filter_config',
    'phi_by_order',
    'time_unit',
    'noise_mismatch',
    'verbose_results',
    'results_path',
    'parallelism',
])

__all__.append('RunPlan')


def make_run_plan(scenario, config_obj, output=None):
    """Everything `run` needs besides the data."""
    from dskf.config import ConfigException

    scenario_path = _scenario_path(scenario)
    methods = tuple(config_obj._methods())
    if not methods:
        raise ConfigException('no methods to run')
    results_path = output or os.path.join(os.path.dirname(scenario_path), RESULTS_FILENAME)
    return RunPlan(
        scenario_path=scenario_path,
        methods=methods,
        filter_config=config_obj._filter_config(),
        phi_by_order=config_obj._phi_by_order(),
        time_unit=config_obj._time_unit(),
        noise_mismatch=config_obj._noise_mismatch(),
        verbose_results=config_obj._verbose_results(),
        results_path=results_path,
        parallelism=config_obj._parallelism())


__all__.append('make_run_plan')


@defer.inlineCallbacks
def _cmd_run(reactor, args, config_obj):
    from dskf.filter import kinematic_dt
    from dskf.i.grid import GroupTask, run_grid
    from dskf.io import ResultsContainer, RunRecord, save_results
    from dskf.metrics import ideal_curve
    from dskf.simulate import true_tracks

    plan = make_run_plan(args.scenario, config_obj, args.output)
    inputs = _load_inputs(plan.scenario_path)
    scenario = inputs.scenario
    tasks = [
        GroupTask(method, snr, _nominal_noise_variance(inputs, snr, plan.noise_mismatch), inputs.recordings[snr])
        for method in plan.methods
        for snr in scenario.snr_db]
    log.msg('run: %d methods x %d SNR levels x %d realizations' % (
        len(plan.methods), len(scenario.snr_db), scenario.n_realizations))
    outcomes = yield run_grid(reactor, tasks, plan.parallelism,
        leadfield=inputs.leadfield,
        dt=kinematic_dt(scenario.dt, plan.time_unit),
        filter_config=plan.filter_config,
        phi_by_order=plan.phi_by_order,
        verbose_results=plan.verbose_results)

    container = ResultsContainer(scenario, config=config_obj._to_json())
    for outcome in outcomes:
        if outcome.error is not None:
            container.add_failure(outcome.method, outcome.snr_db, outcome.realization, outcome.error)
        else:
            container.add_run(RunRecord(outcome.method, outcome.snr_db, outcome.realization, outcome.z, outcome.argmax))
    truth = true_tracks(scenario)
    ideal = ideal_curve(scenario)
    evaluated = {
        (method, snr): [m for _, m in _cell_metrics(container, method, snr, truth, ideal)]
        for method in plan.methods
        for snr in scenario.snr_db}
    container.tables = table_rows_json(metric_tables(scenario, plan.methods, evaluated))
    _output_dir(os.path.dirname(os.path.abspath(plan.results_path)))
    save_results(plan.results_path, container)
    print(_file_sha256(plan.results_path))
    if container.failures:
        log.msg('run: %d of %d cells failed' % (len(container.failures), len(outcomes)), logLevel=logging.WARNING)
        defer.returnValue(EXIT_NUMERICAL)
    defer.returnValue(EXIT_OK)


# --- evaluate ---


def _snr_tag(snr_db):
    return '%gdb' % snr_db


def _roi_source(scenario, label):
    """The scenario source lying in ROI `label`, or None."""
    indices = scenario.roi(label)
    for spec in scenario.sources:
        if spec.index in indices:
            return spec
    return None


def _peak_steps(scenario):
    from dskf.simulate import peak_step

    steps = []
    for label in (scenario.deep_roi, scenario.cortical_roi):
        spec = _roi_source(scenario, label)
        steps.append(None if spec is None else peak_step(scenario, spec))
    return tuple(steps)


def _cell_metrics(container, method, snr, truth, ideal):
    from dskf.errors import DegenerateInputException
    from dskf.metrics import realization_metrics

    scenario = container.scenario
    n = scenario.leadfield.sources
    per_realization = []
    for realization in range(scenario.n_realizations):
        try:
            run = container.run(method, snr, realization)
        except KeyError:
            continue
        try:
            per_realization.append((run, realization_metrics(run.z[:, :n], scenario, truth, ideal, method, snr, realization)))
        except DegenerateInputException as e:
            log.msg('evaluate: %s %r dB #%d skipped: %s' % (method, snr, realization, e), logLevel=logging.WARNING)
    return per_realization


def metric_tables(scenario, methods, evaluated):
    """
    Error, peak-height and correlation tables of evaluated cells.

    evaluated: {(method, snr_db): [RealizationMetrics]}; a cell with an empty list gets explicit gaps where the table has them.
    """
    from dskf.metrics import correlation_table, error_table, peak_table

    deep_step, cortical_step = _peak_steps(scenario)
    cross_label = '%s_vs_%s' % (scenario.deep_roi, scenario.cortical_roi)
    errors = {}
    tracks = {}
    curves = {}
    for key, metrics in evaluated.items():
        errors[key] = [m.error for m in metrics]
        tracks[key] = (
            [m.tracks[scenario.deep_roi] for m in metrics],
            [m.tracks[scenario.cortical_roi] for m in metrics])
        curves[key] = [(cross_label, 'mean', [m.cross_xcorr for m in metrics if m.cross_xcorr is not None])]
        for label, _ in scenario.rois:
            curves[key].append(('%s_vs_true' % label, 'median_max', [m.true_xcorr[label] for m in metrics if label in m.true_xcorr]))
    return {
        'error_table': error_table(errors, methods),
        'peak_table': peak_table(tracks, deep_step, cortical_step, methods),
        'correlation_table': correlation_table(curves, methods),
    }


__all__.append('metric_tables')


def table_rows_json(tables):
    """metric_tables() output as plain lists, the form stored in a ResultsContainer."""
    return {name: [list(row) for row in rows] for name, rows in tables.items()}


__all__.append('table_rows_json')


def _ensemble_columns(prefix, ens):
    return [
        ('%s_median' % prefix, ens.median),
        ('%s_q10' % prefix, ens.q10),
        ('%s_q25' % prefix, ens.q25),
        ('%s_q75' % prefix, ens.q75),
        ('%s_q90' % prefix, ens.q90),
        ('%s_mean' % prefix, ens.mean),
    ]


def _write_columns(path, columns):
    from dskf.io import write_table

    header = [name for name, _ in columns]
    length = len(columns[0][1])
    write_table(path, header, [[values[i] for _, values in columns] for i in range(length)])


def _cmd_evaluate(reactor, args, config_obj):
    from dskf import plots
    from dskf.io import load_results, write_summary, write_table
    from dskf.metrics import QUANTILE_METHOD, ensemble, ideal_curve, xcorr_shifts
    from dskf.simulate import true_tracks

    container = load_results(args.results)
    container.require_runs()
    scenario = container.scenario
    out = _output_dir(args.output or os.path.join(os.path.dirname(os.path.abspath(args.results)), EVALUATION_DIRNAME))

    methods = list(container.config.get('methods') or [])
    methods += [m for m in container.methods() if m not in methods]
    truth = true_tracks(scenario)
    ideal = ideal_curve(scenario)
    times_ms = scenario.step_times() * 1e3
    shifts = xcorr_shifts(scenario.n_steps)
    shifts_ms = shifts * scenario.dt * 1e3
    deep_step, cortical_step = _peak_steps(scenario)

    written = []
    evaluated = {}
    cells = []
    missing = []
    for method in methods:
        for snr in scenario.snr_db:
            per_realization = _cell_metrics(container, method, snr, truth, ideal)
            metrics = [m for _, m in per_realization]
            evaluated[(method, snr)] = metrics
            if not metrics:
                log.msg('evaluate: no results for %s at %r dB' % (method, snr), logLevel=logging.WARNING)
                missing.append({'method': method, 'snr_db': snr})
                continue
            tag = '%s_%s' % (method, _snr_tag(snr))

            track_ensembles = [(label, ensemble([m.tracks[label] for m in metrics])) for label, _ in scenario.rois]
            columns = [('step', list(range(scenario.n_steps))), ('time_ms', times_ms)]
            for label, ens in track_ensembles:
                columns += _ensemble_columns(label, ens) + [('%s_true' % label, truth[label])]
            written.append(os.path.join(out, 'tracks_%s.csv' % tag))
            _write_columns(written[-1], columns)
            written.append(os.path.join(out, 'tracks_%s.svg' % tag))
            plots.plot_tracks(written[-1], times_ms, track_ensembles, truth, title='%s, %g dB' % (method, snr))

            curve_ensembles = []
            for label, _ in scenario.rois:
                curves = [m.true_xcorr[label] for m in metrics if label in m.true_xcorr]
                if curves:
                    curve_ensembles.append(('%s_vs_true' % label, ensemble(curves)))
            cross = [m.cross_xcorr for m in metrics if m.cross_xcorr is not None]
            if cross:
                curve_ensembles.append(('%s_vs_%s' % (scenario.deep_roi, scenario.cortical_roi), ensemble(cross)))
            columns = [('shift_steps', shifts), ('shift_ms', shifts_ms), ('ideal', ideal)]
            for label, ens in curve_ensembles:
                columns += _ensemble_columns(label, ens)
            written.append(os.path.join(out, 'xcorr_%s.csv' % tag))
            _write_columns(written[-1], columns)
            written.append(os.path.join(out, 'xcorr_%s.svg' % tag))
            plots.plot_xcorr(written[-1], shifts_ms, curve_ensembles, ideal, title='%s, %g dB' % (method, snr))

            cells.append({
                'method': method,
                'snr_db': snr,
                'realizations': len(metrics),
                'track_peak_step': {label: int(ens.median.argmax()) for label, ens in track_ensembles},
                'argmax_in_roi_at_peak': _localization(scenario, [run for run, _ in per_realization], (deep_step, cortical_step)),
            })

    tables = metric_tables(scenario, methods, evaluated)
    if container.tables and container.tables != table_rows_json(tables):
        log.msg('evaluate: metric tables stored by run differ from the recomputed ones', logLevel=logging.WARNING)
    error_rows = tables['error_table']
    written.append(os.path.join(out, 'error_table.csv'))
    write_table(written[-1], ['method', 'snr_db', 'statistic', 'value'], error_rows)
    written.append(os.path.join(out, 'error_table.svg'))
    plots.plot_error_table(written[-1], error_rows, methods, scenario.snr_db)

    written.append(os.path.join(out, 'correlation_table.csv'))
    write_table(written[-1], ['method', 'snr_db', 'curve', 'statistic', 'value'], tables['correlation_table'])

    peak_rows = tables['peak_table']
    written.append(os.path.join(out, 'peak_table.csv'))
    write_table(written[-1], ['method', 'snr_db', 'moment', 'value', 'q10', 'q90'], peak_rows)
    written.append(os.path.join(out, 'peak_table.svg'))
    plots.plot_peak_table(written[-1], peak_rows, methods, scenario.snr_db)

    written.append(os.path.join(out, 'ideal.svg'))
    plots.plot_xcorr(written[-1], shifts_ms, [], ideal, title='ideal cross-correlation')

    written.append(os.path.join(out, 'summary.json'))
    write_summary(written[-1], {
        'type': 'EvaluationSummary',
        'variant': scenario.variant,
        'quantile_method': QUANTILE_METHOD,
        'peak_steps': {'deep': deep_step, 'cortical': cortical_step},
        'error_table': [dict(zip(['method', 'snr_db', 'statistic', 'value'], row)) for row in error_rows],
        'peak_table': peak_rows,
        'correlation_table': [dict(zip(['method', 'snr_db', 'curve', 'statistic', 'value'], row)) for row in tables['correlation_table']],
        'cells': cells,
        'missing_cells': missing,
        'failures': container.failures,
    })
    print(write_manifest(out, written))
    if container.failures or missing:
        return defer.succeed(EXIT_NUMERICAL)
    return defer.succeed(EXIT_OK)


def _localization(scenario, runs, steps):
    """Per ROI, the fraction of realizations whose argmax source lies in that ROI at its source's peak step."""
    fractions = {}
    for label, step in zip((scenario.deep_roi, scenario.cortical_roi), steps):
        if step is None or not runs:
            continue
        indices = set(scenario.roi(label))
        fractions[label] = sum(1 for run in runs if int(run.argmax[step]) in indices) / len(runs)
    return fractions


# --- sweep ---


SweepPoint = namedtuple('SweepPoint', ['value', 'errors', 'error'])


def _sweep_point(value, param, method, inputs, snr, config_obj):
    """Mean-error inputs for one swept value; runs in a grid thread."""
    from dskf.errors import DSKFException
    from dskf.filter import FilterConfig, METHODS, kinematic_dt, method_model, method_schedule, run_method
    from dskf.metrics import ideal_curve, realization_metrics
    from dskf.simulate import true_tracks

    scenario = inputs.scenario
    base = config_obj._filter_config()
    phi_by_order = config_obj._phi_by_order()
    try:
        if param == 'p':
            filter_config = FilterConfig(value, base.theta, base.diag_floor)
        elif param == 'theta':
            filter_config = FilterConfig(base.p, value, base.diag_floor)
        else:
            filter_config = base
            phi_by_order[METHODS[method][0]] = value
        model = method_model(method, inputs.leadfield, kinematic_dt(scenario.dt, config_obj._time_unit()), phi_by_order,
            _nominal_noise_variance(inputs, snr, config_obj._noise_mismatch()))
        schedule = method_schedule(method, model, filter_config, scenario.n_steps)
    except DSKFException as e:
        return [SweepPoint(value, [], str(e))]
    truth = true_tracks(scenario)
    ideal = ideal_curve(scenario)
    errors = []
    for recording in inputs.recordings[snr]:
        try:
            z = run_method(method, schedule, recording.y)
            errors.append(realization_metrics(z, scenario, truth, ideal).error)
        except DSKFException as e:
            log.msg('sweep: %s=%r #%d failed: %s' % (param, value, recording.realization, e), logLevel=logging.WARNING)
    return [SweepPoint(value, errors, None if errors else 'all realizations failed')]


@defer.inlineCallbacks
def _cmd_sweep(reactor, args, config_obj):
    import numpy as np
    from dskf.config import ConfigException, methodT
    from dskf.i.grid import run_grid
    from dskf.io import load_scenario, write_table
    from dskf.metrics import QUANTILE_METHOD

    try:
        method = methodT(args.method)
    except ValueError as e:
        raise ConfigException('--method: %s' % (e,))
    path = _scenario_path(args.scenario)
    levels = load_scenario(path).snr_db
    snr = args.snr if args.snr is not None else levels[0]
    if snr not in levels:
        raise ConfigException('scenario has no %r dB recordings' % (snr,))
    inputs = _load_inputs(path, [snr])

    points = yield run_grid(reactor, list(args.values), config_obj._parallelism(), run=_sweep_point,
        param=args.param, method=method, inputs=inputs, snr=snr, config_obj=config_obj)
    rows = []
    for point in points:
        if point.errors:
            q10, q90 = np.quantile(point.errors, [0.1, 0.9], method=QUANTILE_METHOD)
            rows.append((point.value, float(np.mean(point.errors)), float(q10), float(q90), len(point.errors)))
        else:
            rows.append((point.value, None, None, None, 0))
    out_path = args.output or os.path.join(os.path.dirname(path), 'sweep_%s_%s_%s.csv' % (args.param, method, _snr_tag(snr)))
    write_table(out_path, [args.param, 'mean_error', 'q10', 'q90', 'realizations'], rows)
    print(_file_sha256(out_path))

    if args.calibrate:
        scored = [row for row in rows if row[1] is not None]
        if not scored:
            raise ConfigException('no swept value produced an error estimate')
        best = min(scored, key=lambda row: (row[1], row[0]))
        log.msg('sweep: best %s = %r (mean error %.4f)' % (args.param, best[0], best[1]))
        print('%s=%r' % (args.param, best[0]))
    defer.returnValue(EXIT_NUMERICAL if any(point.error for point in points) else EXIT_OK)


if __name__ == '__main__':
    main()
