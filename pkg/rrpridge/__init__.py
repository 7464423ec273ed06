"""
rrpridge - Ridge detection and mode retrieval in the STFT domain.

Detects the ridges of noisy multicomponent AM-FM signals through relevant
ridge portions, reconstructs the modes, and ships the classical peeling
detectors and reconstructors used as baselines.
"""

__version__ = "0.1.0"
__author__ = "rrpridge team"
