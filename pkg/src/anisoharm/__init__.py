"""Anisotropic harmonic analysis toolkit."""
