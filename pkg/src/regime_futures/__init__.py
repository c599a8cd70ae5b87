"""Futures pricing and optimal futures trading under regime-switching diffusions."""

__version__ = "0.1.0"
