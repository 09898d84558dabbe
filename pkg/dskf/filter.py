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
Standardized Kalman filtering of lead-field observations.

One step of the dynamical standardized filter is predict() -> gain() -> update() -> standardize(); run_filter() loops them from x_0 = 0, P_0 = theta I. The covariance half of that loop (P, S, K, W) never looks at the observations, so compute_gain_schedule() does it once and run_filter() can replay it over any number of noise realizations.

Method names used by the experiment harness:
    skf     order-0 (random walk) model, filtered
    sskf    skf followed by rts_smooth
    dskf2   order-1 (activity, velocity) model
    dskf3   order-2 (activity, velocity, acceleration) model
    sdskf2, sdskf3   the dynamical models followed by rts_smooth
"""

from __future__ import absolute_import, division

from collections import namedtuple
import logging

import numpy as np
from twisted.python import log

from dskf.errors import DegenerateStepException, NumericalException, ParameterException, ShapeException
from dskf.math import clip_psd, inv_sqrtm_psd, pd_solve, symmetrize
from dskf.statespace import assemble_model
from dskf import types


__all__ = []  # appended later


_PSD_TOLERANCE = 1e-10


FilterState = namedtuple('FilterState', [
    'x',  # mean, length (s+1)n: nA·m, then nA·m/s, nA·m/s^2 blocks
    'P',  # covariance, (s+1)n square
])

__all__.append('FilterState')


FilterFrame = namedtuple('FilterFrame', [
    't',  # zero-based step index
    'x_pred',
    'P_pred',
    'x_post',
    'P_post',
    'K',  # gain, (s+1)n x m
    'S',  # innovation covariance, m x m
    'W',  # standardization weight, (s+1)n square
    'z',  # standardized state W x_post (dimensionless)
])

__all__.append('FilterFrame')


SmoothedState = namedtuple('SmoothedState', [
    't',
    'z',  # smoothed standardized state
    'P',  # smoothed covariance
])

__all__.append('SmoothedState')


class FilterConfig(namedtuple('FilterConfig', [
        'p',  # standardization exponent
        'theta',  # initial covariance scale, nA·m^2
        'diag_floor'])):  # relative floor on the standardization normalizer
    """Tuning of the standardized filter. Values are validated on construction."""

    def __new__(cls, p=1.0, theta=100.0, diag_floor=1e-12):
        try:
            p = types.positive(p)
            theta = types.positive(theta)
            diag_floor = types.nonnegative(diag_floor)
        except ValueError as e:
            raise ParameterException('invalid filter configuration: %s' % (e,))
        return super(FilterConfig, cls).__new__(cls, p, theta, diag_floor)


__all__.append('FilterConfig')


def initial_state(model, config):
    """x_0 = 0 (no significant activity at the start), P_0 = theta I."""
    dim = model.state_dim
    return FilterState(np.zeros(dim), config.theta * np.eye(dim))


__all__.append('initial_state')


def predict(prev, model):
    """Prediction step: x = A x_prev, P = A P_prev A^T + Q (symmetrized)."""
    A = model.A
    x_pred = A.dot(prev.x)
    P_pred = symmetrize(A.dot(prev.P).dot(A.T) + model.Q)
    return FilterState(x_pred, P_pred)


__all__.append('predict')


def gain(P_pred, model, step=None):
    """
    Kalman gain and innovation covariance for the predicted covariance P_pred.

    S = H P H^T + R; K = P H^T S^-1, obtained by a Cholesky solve of S K^T = H P rather than by inverting S.
    """
    H = model.H
    PHt = P_pred.dot(H.T)
    S = symmetrize(H.dot(PHt) + model.R)
    try:
        K = pd_solve(S, PHt.T).T
    except NumericalException as e:
        raise e.at_step(step) if step is not None else e
    return K, S


__all__.append('gain')


def update(pred, K, S, y, model, step=None):
    """
    Update step: x = x_pred + K (y - H x_pred), P = P_pred - K S K^T (symmetrized).

    If P_post comes out non-PSD by more than the tolerance it is clipped to the PSD cone and a warning is logged.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.electrode_count,):
        raise ShapeException('observation must have length %d, got shape %r' % (model.electrode_count, y.shape))
    if K.shape != (model.state_dim, model.electrode_count):
        raise ShapeException('gain must be %dx%d, got %r' % (model.state_dim, model.electrode_count, K.shape))
    x_post = pred.x + K.dot(y - model.H.dot(pred.x))
    P_post = _posterior_covariance(pred.P, K, S, step)
    return FilterState(x_post, P_post)


__all__.append('update')


def _posterior_covariance(P_pred, K, S, step):
    P_post = symmetrize(P_pred - K.dot(S).dot(K.T))
    clipped, most_negative = clip_psd(P_post, _PSD_TOLERANCE)
    if clipped is not P_post:
        log.msg('Posterior covariance at step %s not PSD (eigenvalue %.3g); clipped.' % (step, most_negative),
            logLevel=logging.WARNING)
    return clipped


def standardize(P_pred, K, S, x_post, p, diag_floor=1e-12, step=None):
    """
    Standardization weight and standardized state.

    With B = P_pred^-1/2 the inverse symmetric square root, M = B K S K^T B and D = Diag(M), floored at diag_floor * max(D):
    W = D^-p B and z = W x_post.

    Returns (W, z).
    """
    if not p >= 0:
        raise ParameterException('standardization exponent must be non-negative, not %r' % (p,))
    try:
        B = inv_sqrtm_psd(P_pred)
    except NumericalException as e:
        raise e.at_step(step) if step is not None else e
    weights = _normalizer(B, K, S, p, diag_floor, step)
    W = weights[:, np.newaxis] * B
    return W, W.dot(x_post)


__all__.append('standardize')


def _normalizer(B, K, S, p, diag_floor, step):
    """D^-p for D = Diag(B K S K^T B), computed without forming the full product."""
    BK = B.dot(K)
    D = np.einsum('ij,jk,ik->i', BK, S, BK)
    largest = D.max()
    if not largest > 0:
        raise DegenerateStepException('standardization normalizer is entirely zero', step=step)
    floor = diag_floor * largest
    floored = D < floor
    if floored.any():
        log.msg('Step %s: %d normalizer entries floored.' % (step, floored.sum()), logLevel=logging.DEBUG)
        D = np.where(floored, floor, D)
    return D ** -p


class GainSchedule(object):
    """
    The observation-independent part of a filter run: P_pred, P_post, K, S, W for each step.

    Built by compute_gain_schedule(). Read-only once built and safe to share between threads.
    If built with keep_covariances=False only K, W (and smoother gains, if requested) are retained.
    """
    def __init__(self, model, config, P_pred, P_post, K, S, W, smoother_gains):
        self.model = model
        self.config = config
        self.P_pred = P_pred
        self.P_post = P_post
        self.K = K
        self.S = S
        self.W = W
        self.smoother_gains = smoother_gains

    @property
    def n_steps(self):
        return len(self.K)


__all__.append('GainSchedule')


def compute_gain_schedule(model, config, n_steps, keep_covariances=True, smoother=False):
    """
    Run the covariance recursion for n_steps steps.

    smoother: also compute the RTS smoother gains C_t = P_t|t A^T (A P_t|t A^T + Q)^-1.
    Exceptions carry the step index at which they happened.
    """
    if n_steps < 1:
        raise ParameterException('need at least one step, not %r' % (n_steps,))
    P = initial_state(model, config).P
    P_preds, P_posts, Ks, Ss, Ws = [], [], [], [], []
    gains = [] if smoother else None
    for t in range(n_steps):
        P_pred = symmetrize(model.A.dot(P).dot(model.A.T) + model.Q)
        if smoother and t > 0:
            # the smoother's P^-_{t|t-1} is this step's P_pred
            gains.append(_smoother_gain(P, P_pred, model, t - 1))
        K, S = gain(P_pred, model, step=t)
        W, _ = standardize(P_pred, K, S, np.zeros(model.state_dim), config.p, config.diag_floor, step=t)
        P = _posterior_covariance(P_pred, K, S, t)
        Ks.append(K)
        Ws.append(W)
        if keep_covariances:
            P_preds.append(P_pred)
            P_posts.append(P)
            Ss.append(S)
    if not keep_covariances:
        P_preds = P_posts = Ss = None
    return GainSchedule(model, config, P_preds, P_posts, Ks, Ss, Ws, gains)


__all__.append('compute_gain_schedule')


def _check_observations(observations, model):
    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim != 2 or observations.shape[1] != model.electrode_count:
        raise ShapeException('observations must be T x %d, got shape %r' % (model.electrode_count, observations.shape))
    if observations.shape[0] < 1:
        raise ParameterException('need at least one observation')
    return observations


def run_filter(model, observations, config, schedule=None):
    """
    Run the standardized filter over observations (T x m) and return the list of T FilterFrames.

    schedule: a GainSchedule for this model and config with covariances kept, to skip recomputing the covariance recursion.
    """
    observations = _check_observations(observations, model)
    T = observations.shape[0]
    if schedule is None:
        schedule = compute_gain_schedule(model, config, T)
    elif schedule.P_pred is None or schedule.n_steps < T:
        raise ParameterException('gain schedule lacks covariances or is shorter than the observations')
    frames = []
    x = initial_state(model, config).x
    for t in range(T):
        x_pred = model.A.dot(x)
        K = schedule.K[t]
        x = x_pred + K.dot(observations[t] - model.H.dot(x_pred))
        W = schedule.W[t]
        frames.append(FilterFrame(
            t=t,
            x_pred=x_pred,
            P_pred=schedule.P_pred[t],
            x_post=x,
            P_post=schedule.P_post[t],
            K=K,
            S=schedule.S[t],
            W=W,
            z=W.dot(x)))
    return frames


__all__.append('run_filter')


def standardized_sequence(schedule, observations):
    """
    Standardized states z_t|t (T x (s+1)n) for one observation sequence, using a precomputed schedule.

    Equivalent to stacking the z of run_filter() but keeps nothing else.
    """
    model = schedule.model
    observations = _check_observations(observations, model)
    T = observations.shape[0]
    if schedule.n_steps < T:
        raise ParameterException('gain schedule has %d steps, observations have %d' % (schedule.n_steps, T))
    x = np.zeros(model.state_dim)
    z = np.empty((T, model.state_dim))
    for t in range(T):
        x_pred = model.A.dot(x)
        x = x_pred + schedule.K[t].dot(observations[t] - model.H.dot(x_pred))
        z[t] = schedule.W[t].dot(x)
    return z


__all__.append('standardized_sequence')


def _smoother_gain(P, P_minus, model, step):
    try:
        # C = P A^T (P^-)^-1, i.e. C^T = (P^-)^-1 A P for symmetric P, P^-.
        return pd_solve(P_minus, model.A.dot(P)).T
    except NumericalException as e:
        raise e.at_step(step)


def _smoother_gains(P_posts, model):
    gains = []
    for t in range(len(P_posts) - 1):
        P = P_posts[t]
        P_minus = symmetrize(model.A.dot(P).dot(model.A.T) + model.Q)
        gains.append(_smoother_gain(P, P_minus, model, t))
    return gains


def _smooth_z(z_seq, gains, model):
    T = len(z_seq)
    smoothed = np.array(z_seq, dtype=np.float64, copy=True)
    for t in range(T - 2, -1, -1):
        z_minus = model.A.dot(z_seq[t])
        smoothed[t] = z_seq[t] + gains[t].dot(smoothed[t + 1] - z_minus)
    return smoothed


def rts_smooth(frames, model):
    """
    Rauch-Tung-Striebel backward pass over a complete forward pass.

    The recursion runs on the standardized states z_t|t together with the filter covariances P_t|t, as the standardized smoother is defined; the covariance recursion uses the smoothed P of step t+1.
    Returns a list of SmoothedState, one per frame.
    """
    frames = list(frames)
    if not frames:
        return []
    P_posts = [f.P_post for f in frames]
    gains = _smoother_gains(P_posts, model)
    z_bar = _smooth_z([f.z for f in frames], gains, model)
    T = len(frames)
    P_bar = [None] * T
    P_bar[T - 1] = P_posts[T - 1]
    for t in range(T - 2, -1, -1):
        P = P_posts[t]
        P_minus = symmetrize(model.A.dot(P).dot(model.A.T) + model.Q)
        C = gains[t]
        P_bar[t] = symmetrize(P + C.dot(P_bar[t + 1] - P_minus).dot(C.T))
    return [SmoothedState(t, z_bar[t], P_bar[t]) for t in range(T)]


__all__.append('rts_smooth')


def rts_smooth_sequence(schedule, z_seq):
    """Smoothed standardized states for a z sequence, using the smoother gains stored in schedule."""
    if schedule.smoother_gains is None:
        raise ParameterException('gain schedule was computed without smoother gains')
    return _smooth_z(z_seq, schedule.smoother_gains, schedule.model)


__all__.append('rts_smooth_sequence')


def run_skf(leadfield, observations, config, phi, noise_cov, dt=1.0):
    """Standardized filter with the random-walk model: A = I_n, H = L, Q = phi I_n."""
    model = assemble_model(leadfield, 0, dt, phi, noise_cov)
    return run_filter(model, observations, config)


__all__.append('run_skf')


# name -> (kinematic order, smoothed)
METHODS = {
    'skf': (0, False),
    'sskf': (0, True),
    'dskf2': (1, False),
    'dskf3': (2, False),
    'sdskf2': (1, True),
    'sdskf3': (2, True),
}

PRIMARY_METHODS = ('skf', 'sskf', 'dskf2', 'dskf3')

__all__ += ['METHODS', 'PRIMARY_METHODS']


def kinematic_dt(seconds, time_unit='step'):
    """
    The dt handed to the kinematic model for a filter step of the given length in seconds.

    With time_unit 'step' one filter step is the unit of time, so velocity and acceleration are in nA·m per step and a single theta fits every block of P_0. With 'second' dt is the step length itself.
    """
    if time_unit == 'step':
        return 1.0
    if time_unit == 'second':
        return seconds
    raise ParameterException('unknown time unit %r' % (time_unit,))


__all__.append('kinematic_dt')


def method_model(name, leadfield, dt, phi_by_order, noise_cov):
    """Assemble the KinematicModel used by a named method."""
    if name not in METHODS:
        raise ParameterException('unknown method %r' % (name,))
    order, _ = METHODS[name]
    return assemble_model(leadfield, order, dt, phi_by_order[order], noise_cov)


__all__.append('method_model')


def method_schedule(name, model, config, n_steps):
    """Gain schedule for a named method, keeping only what its standardized output needs."""
    _, smoothed = METHODS[name]
    return compute_gain_schedule(model, config, n_steps, keep_covariances=False, smoother=smoothed)


__all__.append('method_schedule')


def run_method(name, schedule, observations, activity_only=True):
    """
    Standardized estimates of a named method: T x n array (activity block), or T x (s+1)n if not activity_only.

    schedule must come from method_schedule() for the same method.
    """
    _, smoothed = METHODS[name]
    z = standardized_sequence(schedule, observations)
    if smoothed:
        z = rts_smooth_sequence(schedule, z)
    return schedule.model.activity_block(z) if activity_only else z


__all__.append('run_method')


def argmax_diagnostics(z_activity):
    """Per-step index of the largest |z| in the activity block; the lowest index wins ties."""
    return np.argmax(np.abs(np.asarray(z_activity)), axis=1)


__all__.append('argmax_diagnostics')
