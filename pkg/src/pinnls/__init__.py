"""Least-squares PINN solver and benchmark harness for linear PDEs."""

__version__ = "0.1.0"
