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
Shared test helpers: random systems and brute-force reference computations.

The references here are deliberately naive (explicit inverses, full joint covariances) and share no code with dskf.filter.
"""

from __future__ import absolute_import, division

import numpy as np

from dskf.statespace import LeadField, assemble_model


def random_spd(rng, size, scale=1.0):
    """Well-conditioned random symmetric positive definite matrix."""
    a = rng.standard_normal((size, size))
    return scale * (a.dot(a.T) / size + np.eye(size))


def random_leadfield(rng, m, n):
    return LeadField(rng.standard_normal((m, n)), rng.standard_normal((n, 3)))


def random_model(rng, s, m=None, n=None, dt=None, phi=None):
    """A small random KinematicModel of order s with SPD measurement noise."""
    m = m or int(rng.integers(2, 4))
    n = n or int(rng.integers(1, 5))
    dt = dt or float(rng.uniform(0.2, 1.0))
    phi = phi or float(rng.uniform(0.3, 2.0))
    return assemble_model(random_leadfield(rng, m, n), s, dt, phi, random_spd(rng, m, 0.5))


def sample_observations(rng, model, T, theta):
    """Draw x_0 ~ N(0, theta I), run the model T steps and return the T x m observations."""
    d = model.state_dim
    x = rng.standard_normal(d) * theta ** 0.5
    driven = np.flatnonzero(np.diag(model.Q) > 0)
    q_root = np.linalg.cholesky(model.Q[np.ix_(driven, driven)])
    r_root = np.linalg.cholesky(model.R)
    ys = []
    for _ in range(T):
        x = model.A.dot(x)
        x[driven] += q_root.dot(rng.standard_normal(len(driven)))
        ys.append(model.H.dot(x) + r_root.dot(rng.standard_normal(model.electrode_count)))
    return np.array(ys)


class JointGaussian(object):
    """
    Joint covariance of states x_1..x_T and observations y_1..y_T for x_0 ~ N(0, theta I).

    conditional(t, k) gives mean and covariance of x_t (1-based) given y_1..y_k.
    """
    def __init__(self, model, observations, theta):
        A, Q, H, R = model.A, model.Q, model.H, model.R
        T = len(observations)
        d = model.state_dim
        m = model.electrode_count
        self.__d = d
        self.__m = m
        variances = []
        V = theta * np.eye(d)
        for _ in range(T):
            V = A.dot(V).dot(A.T) + Q
            variances.append(V)
        Sxx = np.zeros((T * d, T * d))
        for i in range(T):
            Sxx[i * d:(i + 1) * d, i * d:(i + 1) * d] = variances[i]
            power = np.eye(d)
            for j in range(i + 1, T):
                power = A.dot(power)
                block = power.dot(variances[i])  # Cov(x_j, x_i)
                Sxx[j * d:(j + 1) * d, i * d:(i + 1) * d] = block
                Sxx[i * d:(i + 1) * d, j * d:(j + 1) * d] = block.T
        Hbig = np.kron(np.eye(T), H)
        self.__Sxx = Sxx
        self.__Sxy = Sxx.dot(Hbig.T)
        self.__Syy = Hbig.dot(Sxx).dot(Hbig.T) + np.kron(np.eye(T), R)
        self.__y = np.asarray(observations).reshape(-1)

    def conditional(self, t, k):
        d, m = self.__d, self.__m
        xs = slice((t - 1) * d, t * d)
        if k == 0:
            return np.zeros(d), self.__Sxx[xs, xs]
        ys = slice(0, k * m)
        Sxy = self.__Sxy[xs, ys]
        Syy = self.__Syy[ys, ys]
        mean = Sxy.dot(np.linalg.solve(Syy, self.__y[ys]))
        cov = self.__Sxx[xs, xs] - Sxy.dot(np.linalg.solve(Syy, Sxy.T))
        return mean, cov


def naive_rts(z_seq, P_posts, model):
    """The smoother recursion written out with explicit inverses: returns (z_bar, P_bar) lists."""
    A, Q = model.A, model.Q
    T = len(z_seq)
    z_bar = [None] * T
    P_bar = [None] * T
    z_bar[-1] = np.array(z_seq[-1])
    P_bar[-1] = np.array(P_posts[-1])
    for t in range(T - 2, -1, -1):
        P_minus = A.dot(P_posts[t]).dot(A.T) + Q
        C = P_posts[t].dot(A.T).dot(np.linalg.inv(P_minus))
        z_bar[t] = z_seq[t] + C.dot(z_bar[t + 1] - A.dot(z_seq[t]))
        P_bar[t] = P_posts[t] + C.dot(P_bar[t + 1] - P_minus).dot(C.T)
    return z_bar, P_bar


def assert_allclose_rel(case, actual, expected, rtol, msg=None):
    """Entrywise |actual - expected| <= rtol * max|expected| (scale-relative, so tiny entries do not dominate)."""
    actual = np.asarray(actual)
    expected = np.asarray(expected)
    case.assertEqual(actual.shape, expected.shape, msg)
    scale = max(np.max(np.abs(expected)), 1e-300)
    error = np.max(np.abs(actual - expected)) / scale
    case.assertLessEqual(error, rtol, msg)
