"""Desk-scale lab for joint out-of-distribution detection and
generalization with decoupled Dirichlet uncertainty."""

__version__ = "0.1.0"
