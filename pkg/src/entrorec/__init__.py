"""Collaborative web recommender with two-level entropy trust selection."""

__version__ = "0.1.0"
