"""Simulator and analysis toolkit for a motion-synchronizing continuum robot."""

__version__ = "0.1.0"
