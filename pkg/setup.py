#!/usr/bin/env python

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

from setuptools import setup, find_packages


setup(
    name='DSKF',
    # version='...',  # No versioning is defined yet
    description='Dynamical standardized Kalman filtering for EEG source tracking, with a synthetic benchmark.',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Framework :: Twisted',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Medical Science Apps.',
    ],
    license='GPLv3+',
    packages=find_packages(exclude=['dskf.test', 'dskf.test.*']),
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=[
        'twisted',
        'zope.interface',
        'numpy>=1.22',  # np.quantile(method=...)
        'scipy',
        'matplotlib',
    ],
    dependency_links=[],
    zip_safe=True,
    entry_points={
        'console_scripts': {
            'dskf = dskf.main:main',
        }
    }
)
