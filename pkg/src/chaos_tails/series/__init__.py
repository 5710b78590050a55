"""Coefficient fields and split-measure bounds."""
