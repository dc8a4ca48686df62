"""
    :license: MIT, see LICENSE for more details.
"""

from setuptools import find_packages, setup

setup(
    name="liqpde",
    python_requires=">=3.10",
    author="liqpde developers",
    version="0.1.1",
    description="Singular terminal value HJB solver and Monte-Carlo verification for "
    "portfolio liquidation with a dark pool",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    license="MIT",
    classifiers=[
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    packages=find_packages(exclude=["tests"]),
    package_data={"liqpde": ["py.typed"]},
    include_package_data=True,
    zip_safe=False,
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.11",
        "pandas>=2.0",
        "sqlalchemy>=1.4",
        "pydantic>=2",
        "python-dotenv",
        "pytz",
        'tomli; python_version < "3.11"',
    ],
    extras_require={"tests": ["pytest", "mock"]},
    entry_points={"console_scripts": ["liqpde=liqpde.cli:main"]},
)
