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

"""Mathematical helpers: decibels and symmetric-matrix functions."""

from __future__ import absolute_import, division

from math import log10

import numpy as np
import scipy.linalg

from dskf.errors import NumericalException


__all__ = []  # appended later


def dB(x):
    """Convert power dB value to multiplicative value."""
    return 10 ** (0.1 * x)


__all__.append('dB')


def to_dB(x):
    """Convert multiplicative power value to dB value."""
    return 10 * log10(x)


__all__.append('to_dB')


def symmetrize(matrix):
    """Return (M + M^T) / 2."""
    return 0.5 * (matrix + matrix.T)


__all__.append('symmetrize')


def inv_sqrtm_psd(matrix, rel_floor=1e-12):
    """
    Inverse principal square root of a symmetric positive (semi)definite matrix.

    Eigenvalues below rel_floor * max eigenvalue are clamped up to that floor rather than rejected, so a rank-deficient but nonzero matrix still has a (large but finite) inverse root.
    Raises NumericalException if the matrix has no positive eigenvalue or the decomposition fails.
    """
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(symmetrize(matrix))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalException('eigendecomposition failed: %s' % (e,))
    largest = eigenvalues[-1] if len(eigenvalues) else 0.0
    if not largest > 0 or not np.all(np.isfinite(eigenvalues)):
        raise NumericalException('matrix is not positive definite (largest eigenvalue %r)' % (largest,))
    clamped = np.maximum(eigenvalues, largest * rel_floor)
    root = (eigenvectors * clamped ** -0.5).dot(eigenvectors.T)
    return symmetrize(root)


__all__.append('inv_sqrtm_psd')


def clip_psd(matrix, tolerance=1e-10):
    """
    Project a symmetric matrix onto the PSD cone if it violates it by more than tolerance * norm.

    Returns (matrix, most_negative_eigenvalue); the matrix is returned unchanged (same object) when no clipping was needed.
    """
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    most_negative = eigenvalues[0] if len(eigenvalues) else 0.0
    scale = np.abs(eigenvalues).max() if len(eigenvalues) else 0.0
    if most_negative >= -tolerance * scale:
        return matrix, most_negative
    clipped = (eigenvectors * np.maximum(eigenvalues, 0.0)).dot(eigenvectors.T)
    return symmetrize(clipped), most_negative


__all__.append('clip_psd')


def pd_solve(matrix, rhs):
    """
    Solve matrix . X = rhs for symmetric positive definite matrix using a Cholesky factorization.

    Raises NumericalException if the factorization fails.
    """
    try:
        factor = scipy.linalg.cho_factor(matrix, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalException('Cholesky factorization failed: %s' % (e,))
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


__all__.append('pd_solve')
