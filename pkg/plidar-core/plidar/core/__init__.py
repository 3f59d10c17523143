"""
Core module exposes the numerical models and operations
These are composed by the CLI and run in batch by the Builders
"""
from plidar.core.settings import PlidarSettings

SETTINGS = PlidarSettings()
