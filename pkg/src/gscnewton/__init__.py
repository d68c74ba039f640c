"""Approximate Newton solvers for regularized generalized self-concordant losses."""

__version__ = "0.1.0"
