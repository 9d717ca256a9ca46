import os
from setuptools import setup, find_packages

# Read the contents of README file
this_directory = os.path.abspath(os.path.dirname(__file__))
with open(os.path.join(this_directory, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

# Read version from __version__.py
version_file = os.path.join(this_directory, 'sramdp', '__version__.py')
with open(version_file) as f:
    exec(f.read())

setup(
    name="sramdp",
    version=__version__,
    description="Simulator for local differential privacy from low-voltage SRAM bit failures",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="sramdp developers",
    packages=find_packages(exclude=["tests*", "examples*"]),
    include_package_data=True,
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "PyYAML>=6.0",
        "python-dotenv>=0.19.0",
        "pytest>=7.0.0",
    ],
    extras_require={
        "dev": [
            "pytest-cov>=4.0.0",
            "black>=22.0.0",
            "flake8>=5.0.0",
            "mypy>=1.0.0",
            "build>=0.10.0",
        ],
        "test": [
            "pytest-xdist>=3.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "sramdp = sramdp.cli:main",
        ],
        "pytest11": [
            "sramdp = sramdp.pytest_plugin",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Security",
        "Topic :: System :: Hardware",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Operating System :: OS Independent",
    ],
    keywords="differential-privacy sram approximate-memory local-dp simulation",
    python_requires=">=3.9",
    zip_safe=False,
)
