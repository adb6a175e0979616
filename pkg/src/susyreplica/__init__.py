"""Replica partition functions, Pfaffian-KP checks and GOE two-point correlations."""

__version__ = "0.1.0"
