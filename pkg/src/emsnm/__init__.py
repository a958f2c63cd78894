"""Simulator and analytical cost model for domain-partitioned network management."""

__version__ = "0.1.0"
