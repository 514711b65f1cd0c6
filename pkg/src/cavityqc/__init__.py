"""Simulation of quantum gates built from atoms crossing high-Q microwave cavities."""
__version__ = "0.1.0"
