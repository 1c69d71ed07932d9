"""Tests for tskprune."""
