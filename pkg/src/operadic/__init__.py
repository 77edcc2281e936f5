"""Exact computational engine for layered rectangle operads, decorated tree
resolutions and their axiom suites."""

__version__ = "0.1.0"
