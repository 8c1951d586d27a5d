"""Branching microstructures for martensite nucleation at a corner."""
