"""Tests for gbcheck."""
