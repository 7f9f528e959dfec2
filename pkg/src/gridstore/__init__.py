"""Storage planning for distribution grids under market-participation limits."""

__version__ = "0.1.0"
