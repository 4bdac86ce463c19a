"""Exact path-length statistics and channel-wise PReLU linearization for
small residual networks."""

__version__ = "0.1.0"
