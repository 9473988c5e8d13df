"""Runtime enforcement of timed traffic specifications on motorways."""

__version__ = "0.1.0"
