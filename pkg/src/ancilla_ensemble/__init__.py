"""Simulation toolkit for ancilla-assisted measurements on quantum ensembles."""

__version__ = "0.1.0"
