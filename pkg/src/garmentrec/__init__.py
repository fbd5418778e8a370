"""Garment reconstruction by co-evolving explicit feature curves and grid SDFs."""

__version__ = "0.1.0"
