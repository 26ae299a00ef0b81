"""Create, read, validate and analyze AI bills of materials."""

__version__ = "0.1.0"
