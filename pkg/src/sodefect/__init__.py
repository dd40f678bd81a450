"""Defectiveness estimation for source files by matching their functions
against pre-scored Stack Overflow code fragments."""

__version__ = "0.1.0"
