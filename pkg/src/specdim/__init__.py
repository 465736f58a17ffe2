"""Generalized fractal dimensions of measures on the line."""
