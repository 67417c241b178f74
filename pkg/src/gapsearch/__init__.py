"""Extraction, indexing and faceted search of challenge/direction sentences."""

__version__ = "0.1.0"
