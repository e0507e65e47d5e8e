"""FRQI image encoding: circuit builders, lowering, routing and simulation."""

__version__ = "0.1.0"
