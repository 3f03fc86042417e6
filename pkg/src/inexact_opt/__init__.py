"""Intermediate gradient methods with inexact oracles."""

__version__ = "0.1.0"
