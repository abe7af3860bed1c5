"""Content-based flower image identification toolkit."""

__version__ = "0.1.0"
