"""Epidemic time-series analysis, forecasting, simulation and calibration."""

__version__ = "0.1.0"
