"""Sharded, resumable pipeline for building a spoken-dialogue corpus."""

__version__ = "0.1.0"
