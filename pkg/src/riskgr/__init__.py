"""RIS-assisted physical-layer key generation over spatially correlated channels."""

__version__ = "0.1.0"
