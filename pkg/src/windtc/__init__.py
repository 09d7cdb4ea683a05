"""Wind-farm siting and sizing under market clearing with transmission switching."""

__version__ = "0.1.0"
