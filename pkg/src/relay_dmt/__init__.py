"""Diversity-multiplexing tradeoff tools for amplify-and-forward relay networks."""

__version__ = "0.1.0"
