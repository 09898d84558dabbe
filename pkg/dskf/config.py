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
Config interface and config file management.

The "public" operations on Config are used by configuration files to specify configuration. The "private" operations are then used by main.py to run experiments with it.
"""

from __future__ import absolute_import, division

import os
import os.path

from twisted.python import log

from dskf import types
from dskf.errors import DSKFException
from dskf.filter import FilterConfig, PRIMARY_METHODS
from dskf import units


__all__ = []  # appended later


OUTPUT_ROOT_ENV = 'DSKF_OUTPUT_ROOT'
DEFAULT_OUTPUT_ROOT = 'dskf-out'

# Process-noise variance per kinematic order with the time unit of one filter step: the values on a log grid
# 10^(k/2) nearest the per-step change of a 10 nA·m, 2 ms pulse over 40 steps of 3 ms. `dskf sweep --param phi
# --calibrate` picks the optimum for a given scenario.
DEFAULT_PHI = {
    0: 10.0,
    1: 0.316,
    2: 0.1,
}

DEFAULT_TIME_UNIT = 'step'

_METHOD_NAMES = {
    'skf': 'standardized Kalman filter, random-walk model',
    'sskf': 'skf followed by the RTS smoother',
    'dskf2': 'dynamical filter, first-order kinematics',
    'dskf3': 'dynamical filter, second-order kinematics',
    'sdskf2': 'dskf2 followed by the RTS smoother',
    'sdskf3': 'dskf3 followed by the RTS smoother',
}

methodT = types.EnumT(_METHOD_NAMES)
orderT = types.EnumT({'0': 'random walk', '1': 'velocity', '2': 'acceleration'})
_parallelismT = types.RangeT(1, integer=True)
_pT = types.RangeT(0.0, min_exclusive=True)
_thetaT = types.RangeT(0.0, min_exclusive=True, unit=units.nAm)
_phiT = types.RangeT(0.0, min_exclusive=True)
_floorT = types.RangeT(0.0, 1.0)
_mismatchT = types.RangeT(0.0, min_exclusive=True)
_timeUnitT = types.EnumT({
    'step': 'one filter step is the unit of time',
    'second': 'kinematic states in nA·m per second',
})

__all__ += ['OUTPUT_ROOT_ENV', 'DEFAULT_OUTPUT_ROOT', 'DEFAULT_PHI', 'DEFAULT_TIME_UNIT', 'methodT', 'orderT']


def _coerce(value_type, name, value):
    try:
        return value_type(value)
    except (TypeError, ValueError) as e:
        raise ConfigException('%s: %s' % (name, e))


class Config(object):
    def __init__(self):
        # private: config state
        self.__p = 1.0
        self.__theta = 100.0
        self.__diag_floor = 1e-12
        self.__phi = dict(DEFAULT_PHI)
        self.__methods = PRIMARY_METHODS
        self.__time_unit = DEFAULT_TIME_UNIT
        self.__parallelism = os.cpu_count() or 1
        self.__verbose_results = False
        self.__noise_mismatch = 1.0
        self.__output_root = os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT

        # private: meta
        self.__finished = False

    def _not_finished(self):
        if self.__finished:
            raise ConfigTooLateException()

    def _finish(self):
        """Freeze the configuration; called by main once flags have been applied."""
        self.__finished = True

    def set_filter(self, p=None, theta=None, diag_floor=None):
        """
        Set the standardization exponent p, the initial covariance scale theta (nA·m^2) and the relative floor on the standardization normalizer. Omitted arguments keep their values.
        """
        self._not_finished()
        if p is not None:
            self.__p = _coerce(_pT, 'p', p)
        if theta is not None:
            self.__theta = _coerce(_thetaT, 'theta', theta)
        if diag_floor is not None:
            self.__diag_floor = _coerce(_floorT, 'diag_floor', diag_floor)

    def set_phi(self, order, phi):
        """Set the process-noise variance of the kinematic model of the given order (0, 1 or 2)."""
        self._not_finished()
        order = int(_coerce(orderT, 'order', order))
        self.__phi[order] = _coerce(_phiT, 'phi', phi)

    def set_time_unit(self, unit):
        """Set the unit of the kinematic time step: 'step' (default) or 'second'."""
        self._not_finished()
        self.__time_unit = _coerce(_timeUnitT, 'time_unit', unit)

    def set_methods(self, *names):
        self._not_finished()
        if not names:
            raise ConfigException('config.set_methods: no method specified')
        coerced = tuple(_coerce(methodT, 'method', name) for name in names)
        if len(set(coerced)) != len(coerced):
            raise ConfigException('config.set_methods: duplicate method in %r' % (coerced,))
        self.__methods = coerced

    def set_parallelism(self, workers):
        """Set the number of grid cells computed concurrently."""
        self._not_finished()
        self.__parallelism = _coerce(_parallelismT, 'parallelism', workers)

    def set_verbose_results(self, verbose):
        """If true, result containers hold the full standardized state rather than only the activity block."""
        self._not_finished()
        self.__verbose_results = bool(verbose)

    def set_noise_mismatch(self, factor):
        """Scale the filter's assumed measurement-noise standard deviation relative to the simulated one."""
        self._not_finished()
        self.__noise_mismatch = _coerce(_mismatchT, 'noise_mismatch', factor)

    def set_output_root(self, path):
        self._not_finished()
        self.__output_root = str(path)

    def _filter_config(self):
        return FilterConfig(p=self.__p, theta=self.__theta, diag_floor=self.__diag_floor)

    def _phi_by_order(self):
        return dict(self.__phi)

    def _time_unit(self):
        return self.__time_unit

    def _methods(self):
        return self.__methods

    def _parallelism(self):
        return self.__parallelism

    def _verbose_results(self):
        return self.__verbose_results

    def _noise_mismatch(self):
        return self.__noise_mismatch

    def _output_root(self):
        return self.__output_root

    def _to_json(self):
        """Effective configuration, recorded alongside results."""
        return {
            'p': self.__p,
            units.nAm.key('theta'): self.__theta,
            'diag_floor': self.__diag_floor,
            'phi': {str(order): value for order, value in self.__phi.items()},
            'time_unit': self.__time_unit,
            'methods': list(self.__methods),
            'verbose_results': self.__verbose_results,
            'noise_mismatch': self.__noise_mismatch,
        }


__all__.append('Config')


def execute_config(config_obj, config_file):
    """Execute a config file with the special environment: the global `config` is config_obj.

    Note: does not _finish()
    """
    env = {'config': config_obj, '__file__': config_file, '__name__': '__config__'}
    try:
        with open(config_file) as f:
            source = f.read()
    except IOError as e:
        raise ConfigException('cannot read config file %s: %s' % (config_file, e.strerror))
    log.msg('Executing config file %s' % (config_file,))
    exec(compile(source, config_file, 'exec'), env)


__all__.append('execute_config')


def write_default_config(new_config_path):
    config_text = '''\
# This is a DSKF configuration file. It is plain Python executed with a
# global `config`; pass it to any subcommand with --config PATH.
# Command-line flags override what is set here.

# Standardization exponent (1.0 for the dynamical filters), initial
# covariance scale theta in nA*m^2, and the relative floor on the
# standardization normalizer.
config.set_filter(p=%(p)r, theta=%(theta)r, diag_floor=%(diag_floor)r)

# Process-noise variance per kinematic order: 0 is the random walk of skf,
# 1 the velocity model of dskf2, 2 the acceleration model of dskf3.
config.set_phi(0, %(phi0)r)
config.set_phi(1, %(phi1)r)
config.set_phi(2, %(phi2)r)

# Unit of the kinematic time step, 'step' or 'second'; phi is expressed in it.
config.set_time_unit(%(time_unit)r)

# Methods to run; also available: 'sdskf2', 'sdskf3'.
config.set_methods('skf', 'sskf', 'dskf2', 'dskf3')

# Grid cells computed concurrently.
# config.set_parallelism(4)

# Ratio of the filter's assumed noise level to the simulated one.
config.set_noise_mismatch(1.0)
''' % {
        'p': 1.0,
        'theta': 100.0,
        'diag_floor': 1e-12,
        'phi0': DEFAULT_PHI[0],
        'phi1': DEFAULT_PHI[1],
        'phi2': DEFAULT_PHI[2],
        'time_unit': DEFAULT_TIME_UNIT,
    }

    if os.path.exists(new_config_path):
        raise ConfigException('%s already exists; not overwriting' % (new_config_path,))
    with open(new_config_path, 'w') as f:
        f.write(config_text)


__all__.append('write_default_config')


class ConfigException(DSKFException):
    """Indicates erroneous configuration of some type."""


__all__.append('ConfigException')


class ConfigTooLateException(ConfigException):
    """Indicates that a config method was called too late for it to take effect."""

    def __init__(self):
        super(ConfigTooLateException, self).__init__('Too late to modify configuration')


__all__.append('ConfigTooLateException')
