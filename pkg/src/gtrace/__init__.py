"""Numerical laboratory for traces of group-averaged operators on submanifolds."""

__version__ = "0.1.0"
