#!/usr/bin/env python3

from setuptools import setup, find_packages

from rwenas import __version__

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="rwenas",
    version=__version__,
    description="Multi-objective neural architecture search with random-weight evaluation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "pymoo>=0.6.0",
        "requests>=2.28.0",
        "rich>=13.0.0",
        "typer>=0.9.0,<0.26",
        "click>=8.0.0",
        "pydantic>=2.5.0",
    ],
    extras_require={
        "tests": ["pytest>=7.0.0"],
    },
    entry_points={
        "console_scripts": [
            "rwenas=rwenas.__main__:main",
        ],
    },
)
