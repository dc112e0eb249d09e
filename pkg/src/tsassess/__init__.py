"""Transient stability assessment: scenario generation, dispatch, fault simulation and learned screening."""

__version__ = "0.1.0"
