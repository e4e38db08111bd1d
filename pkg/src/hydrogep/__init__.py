"""Stochastic hydrothermal generation-expansion planning with Benders-type decompositions."""

__version__ = "0.1.0"
