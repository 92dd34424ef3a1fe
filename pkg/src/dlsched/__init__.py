"""Data-locality-aware task assignment and job reordering for distributed jobs."""
__version__ = "0.1.0"
