"""Figures from aggregate regret CSVs."""

__version__ = "0.1.0"
