# setup.py
# Legacy compatibility for pygibias

from setuptools import setup, find_packages

setup(
    name="pygibias",
    version="0.1.0",
    description="Gittins-index learning under risk and the biases it produces",
    author="The pygibias developers",
    packages=find_packages(include=["gibias", "gibias.*"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.7",
        "pandas>=1.3",
        "tqdm>=4.60",
        "matplotlib>=3.4",
    ],
    entry_points={
        "console_scripts": ["gibias = gibias.cli:main"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU Lesser General Public License v3 or later (LGPLv3+)",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
