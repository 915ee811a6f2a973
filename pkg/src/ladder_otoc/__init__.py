"""Finite-temperature OTOCs from coupled spin chains: simulation toolkit."""

__version__ = "0.1.0"
