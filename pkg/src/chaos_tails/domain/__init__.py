"""Shared types, wire models and errors."""
