"""Deterministic multi-agent visibility coverage on orthogonal grid worlds."""

__version__ = "0.1.0"
