"""Operational tooling modules."""
