"""Deterministic maglev conveyor-line simulator and motion-control toolkit."""

__version__ = "0.1.0"
