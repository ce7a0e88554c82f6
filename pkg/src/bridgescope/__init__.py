"""Detection engine for cross-chain bridge attacks over lock/unlock execution traces."""

__version__ = "0.1.0"
