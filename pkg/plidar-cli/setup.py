# -*- coding: utf-8 -*-
from setuptools import find_namespace_packages, setup

setup(
    name="plidar-cli",
    use_scm_version={"root": "..", "relative_to": __file__},
    setup_requires=["setuptools_scm"],
    description="command line interface for plidar",
    author="The plidar developers",
    packages=find_namespace_packages(include=["plidar.*"]),
    install_requires=["click", "plidar-core"],
    license="modified BSD",
    zip_safe=False,
    entry_points="""
    [console_scripts]
    plidar=plidar.cli.entry_point:safe_entry_point
    """,
)
