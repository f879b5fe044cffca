"""Match, merge and score citation datasets from two bibliographic sources."""

__version__ = "0.1.0"
