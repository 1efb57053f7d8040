"""Cyber-physical restoration environments and adversarial reward learning."""

__version__ = "0.1.0"
