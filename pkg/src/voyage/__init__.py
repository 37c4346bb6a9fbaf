"""Fuel- and time-optimal USV trajectory planning with refueling ports."""

__version__ = "0.1.0"
