"""Vacancy-like dressed states of atoms in structured photonic baths."""

__version__ = "0.1.0"
