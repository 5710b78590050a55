"""Martingale and independent-case bound recursions."""
