"""Numerics for lower bounds on learning quantum channels in diamond norm."""

__version__ = "0.1.0"
