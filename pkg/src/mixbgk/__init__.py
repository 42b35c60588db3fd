"""Deterministic solver and verification suite for the two-species BGK mixture model."""

__version__ = "0.1.0"
