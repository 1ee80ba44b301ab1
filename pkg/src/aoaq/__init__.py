"""Reliability analysis of redundant angle-of-attack sensor panels and MCAS-style intervention logic."""

__version__ = "0.1.0"
