"""Numerical toolkit for generator-based martingales of Lévy-driven processes
coupled with finite-variation processes."""

__version__ = "0.1.0"
