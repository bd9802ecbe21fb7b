"""Closed-loop optical navigation and observability-constrained control near small bodies."""

__version__ = "0.1.0"
