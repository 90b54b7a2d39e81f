"""Regression and model comparison for state legislature polarization panels."""

__version__ = "0.1.0"
