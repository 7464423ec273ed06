"""Test suite for rrpridge."""
