"""Monte Carlo and exact-enumeration verification."""
