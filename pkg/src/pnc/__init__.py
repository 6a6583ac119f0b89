"""Partition-and-code lossless graph compression."""

__version__ = "0.1.0"
