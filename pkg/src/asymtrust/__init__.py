"""Asymmetric-trust quorum structures, protocols, simulation and property checking."""

__version__ = "0.1.0"
