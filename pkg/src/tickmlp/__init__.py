"""Tick-level price-movement prediction with online-updated MLP ensembles."""

__version__ = "0.1.0"
