"""Core infrastructure: settings, logging, errors, result persistence."""
