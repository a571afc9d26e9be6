"""Exact traces, regularized determinants and magic angles of the chiral twisted bilayer graphene model."""

__version__ = "0.1.0"
