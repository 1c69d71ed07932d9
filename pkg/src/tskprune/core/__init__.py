"""Core modules for tskprune."""
