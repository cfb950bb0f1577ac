"""Construct, verify, optimize and measure rho-separable translative packings."""

__version__ = "0.1.0"
