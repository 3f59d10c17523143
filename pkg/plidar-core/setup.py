# -*- coding: utf-8 -*-
from setuptools import find_namespace_packages, setup

setup(
    name="plidar-core",
    use_scm_version={"root": "..", "relative_to": __file__},
    setup_requires=["setuptools_scm"],
    description="Core pseudo-LiDAR depth correction library",
    author="The plidar developers",
    packages=find_namespace_packages(include=["plidar.*"]),
    package_data={"plidar.core": ["*.yaml"]},
    install_requires=[
        "numpy",
        "scipy",
        "monty",
        "ruamel.yaml",
        "pydantic<2",
        "requests",
        "typing-extensions",
        "pillow",
        "matplotlib",
    ],
    license="modified BSD",
    zip_safe=False,
)
