"""Sequential compressed sensing: measure one row at a time, decode, and stop when the data say so."""

__version__ = "0.1.0"
