"""Workbench for deterministic-control quantum Turing machines."""

__version__ = "0.1.0"
