"""Self-similar blow-up laboratory for the slightly supercritical NLS."""

__version__ = "0.1.0"
