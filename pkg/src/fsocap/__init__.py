"""Ergodic capacity of free-space optical links with transmit power adaptation."""

__version__ = "0.1.0"
