"""Batch experiments: benchmark harness, demonstrations, GW pipeline."""
