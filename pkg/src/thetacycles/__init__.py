"""Cycle integrals of modular forms via theta lattices on binary quadratic forms."""

__version__ = "0.1.0"
