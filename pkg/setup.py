"""Packaging for unif3, the local uniformization engine."""

from setuptools import find_packages, setup

setup(
    name="unif3",
    version="1.0.0",
    description="Exact local uniformization of foliations by lines in dimension at most three",
    package_dir={"": "foliation_uniformizer/src"},
    packages=find_packages(where="foliation_uniformizer/src"),
    py_modules=["main"],
    package_data={"config": ["engine_config.json"]},
    python_requires=">=3.8",
    install_requires=[
        "sympy>=1.10",
        "mpmath>=1.2.0",
    ],
    extras_require={
        "dev": ["pytest>=7.0.0"],
    },
    entry_points={
        "console_scripts": [
            "unif3=main:main",
        ],
    },
)
