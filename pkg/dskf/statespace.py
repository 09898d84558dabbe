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
Kinematic state-space systems built around an EEG lead field.

The state of an order-s model stacks the source activity d (nA·m) with its first s time derivatives: x = [d; v] for s = 1, x = [d; v; a] for s = 2, and x = d for s = 0. Only the highest derivative is driven by process noise, except at s = 0 where the activity itself random-walks.

All arrays handed out by this module are read-only; models are shared between concurrently running filters.
"""

from __future__ import absolute_import, division

from math import factorial

import numpy as np
import scipy.linalg

from dskf.errors import ParameterException, ShapeException
from dskf.math import symmetrize


__all__ = []  # appended later


_ORDERS = (0, 1, 2)


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


class LeadField(object):
    """
    Linear map from fixed-orientation source strengths to electrode potentials.

    matrix: m x n, one column per source.
    positions: n x 3 source positions (mm, or unit-ball coordinates for synthetic fields).
    """
    def __init__(self, matrix, positions):
        matrix = _frozen(matrix)
        positions = _frozen(positions)
        if matrix.ndim != 2:
            raise ShapeException('lead field must be a matrix, got %d dimensions' % matrix.ndim)
        m, n = matrix.shape
        if m < 2 or n < 1:
            raise ShapeException('lead field needs at least 2 electrodes and 1 source, got %dx%d' % (m, n))
        if positions.shape != (n, 3):
            raise ShapeException('positions must be %dx3, got %r' % (n, positions.shape))
        if not np.all(np.isfinite(matrix)):
            raise ParameterException('lead field contains non-finite entries')
        zero_columns = np.flatnonzero(~np.any(matrix != 0, axis=0))
        if len(zero_columns):
            raise ParameterException('lead field columns %s are zero' % (zero_columns[:10].tolist(),))
        self.__matrix = matrix
        self.__positions = positions

    @property
    def matrix(self):
        return self.__matrix

    @property
    def positions(self):
        return self.__positions

    @property
    def electrode_count(self):
        return self.__matrix.shape[0]

    @property
    def source_count(self):
        return self.__matrix.shape[1]

    def column_norms(self):
        return np.linalg.norm(self.__matrix, axis=0)

    def __eq__(self, other):
        return (
            isinstance(other, LeadField) and
            np.array_equal(self.__matrix, other.__matrix) and
            np.array_equal(self.__positions, other.__positions))

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return '<LeadField %dx%d>' % self.__matrix.shape


__all__.append('LeadField')


def _check_order(s):
    if s not in _ORDERS:
        raise ParameterException('kinematic order must be 0, 1 or 2, not %r' % (s,))


def _check_positive(name, value):
    if not value > 0 or not np.isfinite(value):
        raise ParameterException('%s must be positive and finite, not %r' % (name, value))


def build_transition(s, dt, n):
    """
    Transition matrix of the order-s kinematic model, size (s+1)n.

    Block (i, j) for j >= i is dt^(j-i)/(j-i)! I_n; blocks below the diagonal are zero. s = 0 gives I_n.
    """
    _check_order(s)
    _check_positive('dt', dt)
    if n < 1:
        raise ParameterException('source count must be at least 1, not %r' % (n,))
    small = np.zeros((s + 1, s + 1))
    for i in range(s + 1):
        for j in range(i, s + 1):
            small[i, j] = dt ** (j - i) / factorial(j - i)
    return _frozen(np.kron(small, np.eye(n)))


__all__.append('build_transition')


def build_process_noise(s, dt, phi, n):
    """
    Process-noise covariance of the order-s model (s >= 1), size (s+1)n.

    Only the bottom-right n x n block is nonzero and equals (s / dt^s) phi I_n. The matrix is rank-deficient on purpose; the filter copes with that and no jitter is added here.

    For s = 0 use random_walk_noise instead.
    """
    if s == 0:
        raise ParameterException('order 0 has no kinematic process noise; use random_walk_noise(phi, n)')
    _check_order(s)
    _check_positive('dt', dt)
    _check_positive('phi', phi)
    if n < 1:
        raise ParameterException('source count must be at least 1, not %r' % (n,))
    q = np.zeros(((s + 1) * n, (s + 1) * n))
    q[s * n:, s * n:] = (s / dt ** s) * phi * np.eye(n)
    return _frozen(q)


__all__.append('build_process_noise')


def random_walk_noise(phi, n):
    """Process-noise covariance phi I_n of the order-0 (random-walk) model."""
    _check_positive('phi', phi)
    if n < 1:
        raise ParameterException('source count must be at least 1, not %r' % (n,))
    return _frozen(phi * np.eye(n))


__all__.append('random_walk_noise')


def build_observation(leadfield, s):
    """Observation matrix H = [L 0_{m x sn}]; for s = 0 this is L itself."""
    _check_order(s)
    matrix = leadfield.matrix
    if s == 0:
        return matrix
    m, n = matrix.shape
    return _frozen(np.hstack([matrix, np.zeros((m, s * n))]))


__all__.append('build_observation')


class KinematicModel(object):
    """One linear-Gaussian state-space system: x_t = A x_{t-1} + q_t, y_t = H x_t + r_t.

    Construct with assemble_model() rather than directly.
    """
    def __init__(self, leadfield, order, dt, phi, A, Q, H, R):
        self.leadfield = leadfield
        self.order = order
        self.dt = dt
        self.phi = phi
        self.A = A
        self.Q = Q
        self.H = H
        self.R = R

    @property
    def source_count(self):
        return self.leadfield.source_count

    @property
    def electrode_count(self):
        return self.leadfield.electrode_count

    @property
    def state_dim(self):
        return (self.order + 1) * self.leadfield.source_count

    def activity_block(self, x):
        """Return the first n entries (source activity) of a state or standardized-state vector or stack of them."""
        return x[..., :self.leadfield.source_count]

    def __repr__(self):
        return '<KinematicModel order=%d dt=%r phi=%r state_dim=%d>' % (self.order, self.dt, self.phi, self.state_dim)


__all__.append('KinematicModel')


def _as_noise_covariance(noise_cov, m):
    R = np.asarray(noise_cov, dtype=np.float64)
    if R.ndim == 0:
        _check_positive('measurement noise variance', float(R))
        return _frozen(float(R) * np.eye(m))
    if R.shape != (m, m):
        raise ShapeException('measurement noise covariance must be %dx%d, got %r' % (m, m, R.shape))
    if not np.allclose(R, R.T, rtol=1e-10, atol=0):
        raise ParameterException('measurement noise covariance is not symmetric')
    try:
        scipy.linalg.cholesky(R, lower=True)
    except np.linalg.LinAlgError:
        raise ParameterException('measurement noise covariance is not positive definite')
    return _frozen(symmetrize(R))


def assemble_model(leadfield, s, dt, phi, noise_cov):
    """
    Build a KinematicModel of order s.

    noise_cov: either a scalar variance sigma^2 (R = sigma^2 I_m) or an m x m SPD matrix.
    For s = 0 the model is the random-walk baseline: A = I_n, H = L, Q = phi I_n.
    """
    _check_order(s)
    _check_positive('dt', dt)
    _check_positive('phi', phi)
    n = leadfield.source_count
    A = build_transition(s, dt, n)
    if s == 0:
        Q = random_walk_noise(phi, n)
    else:
        Q = build_process_noise(s, dt, phi, n)
    H = build_observation(leadfield, s)
    R = _as_noise_covariance(noise_cov, leadfield.electrode_count)
    return KinematicModel(leadfield=leadfield, order=s, dt=dt, phi=phi, A=A, Q=Q, H=H, R=R)


__all__.append('assemble_model')


def sample_trajectory(model, n_steps, seed, x0=None):
    """
    Draw a state trajectory from the model's own dynamics.

    Returns (states, clean) where states is n_steps x state_dim and clean = states . H^T is the noiseless observation sequence. x0 defaults to zero; process noise is drawn only where Q is nonzero.
    """
    if n_steps < 1:
        raise ParameterException('n_steps must be at least 1')
    rng = np.random.default_rng(seed)
    dim = model.state_dim
    driven = np.flatnonzero(np.diag(model.Q) > 0)
    q_root = np.linalg.cholesky(model.Q[np.ix_(driven, driven)])
    x = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    if x.shape != (dim,):
        raise ShapeException('x0 must have length %d' % dim)
    states = np.empty((n_steps, dim))
    for t in range(n_steps):
        x = model.A.dot(x)
        x[driven] += q_root.dot(rng.standard_normal(len(driven)))
        states[t] = x
    return states, states.dot(model.H.T)


__all__.append('sample_trajectory')
