#!/usr/bin/python
# -* encoding: utf-8 *-

import os
import re

from setuptools import setup, find_packages


_HERE = os.path.abspath(os.path.dirname(__file__))


with open(os.path.join(_HERE, "clinseq/__init__.py"), "rt", encoding="utf-8") as vf:
    lines = vf.readlines()

_version = "0.0.0+local"
for l in lines:
    m = re.match("version = \"(.*?)\"", l)
    if m:
        _version = m.group(1)

_packages = find_packages(exclude=["*.tests", "*.tests.*", "tests.*", "tests"])

_requirements = [
    'colorama==0.4.6',
    'wrapt==1.16.0',
    'aspectlib==2.0.0',
    'tqdm==4.66.4',
    'numpy==1.26.4',
    'scipy==1.13.1',
    'pandas==2.2.2',
    'scikit-learn==1.5.0',
    'joblib==1.4.2',
]

_test_requirements = [
    'pytest==8.2.2',
]

try:
    long_description = open(os.path.join(_HERE, 'README.rst')).read()
except IOError:
    long_description = ""

setup(
    name='optile-clinseq',
    version=_version,
    packages=_packages,
    entry_points={
        "console_scripts": [
            "clinseq = clinseq.main:app",
        ]
    },
    install_requires=_requirements,
    extras_require={
        "test": _test_requirements,
    },
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Intended Audience :: Healthcare Industry",
        "Environment :: Console",
        "Programming Language :: Python :: 3 :: Only",
        "Operating System :: POSIX",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
    ],
    license="MIT",
    description="Declarative prediction pipelines and automated model search for clinical time series",
    long_description=long_description,
)
