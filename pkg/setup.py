import re

from setuptools import setup, find_packages

with open("casekin/__init__.py") as module:
    __version__ = re.search(r'^__version__ = "([^"]+)"', module.read(), re.M).group(1)

setup(
    name="casekin",
    version=__version__,
    description="Marginal survival estimation from case-control family data",
    packages=find_packages(exclude=["*.tests"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.12"
    ],
    entry_points={
        "console_scripts": [
            "casekin = casekin.cli:main"
        ]
    },
    license="MIT"
)
