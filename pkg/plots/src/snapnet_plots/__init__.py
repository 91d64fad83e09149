"""Figure rendering for snapnet CSV exports."""

__version__ = "0.1.0"
