"""Tail functions and the operators that combine them."""
