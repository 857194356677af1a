"""Tests for ftseg."""
