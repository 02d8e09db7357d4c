"""Accelerated spectral clustering by low-pass filtering random graph signals."""
