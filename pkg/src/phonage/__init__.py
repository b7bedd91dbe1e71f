"""Child speaker age estimation from phone duration statistics."""

__version__ = "0.1.0"
