"""Process-algebra toolkit for guarded, truly concurrent protocol models."""

__version__ = "0.1.0"
