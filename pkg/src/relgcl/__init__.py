"""Relational verification workbench for a labeled guarded-command language."""

__version__ = "0.1.0"
