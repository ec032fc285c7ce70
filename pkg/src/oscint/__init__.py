"""Trilinear oscillatory integrals of convolution type: invariants, resolution audits, decay experiments."""

__version__ = "0.1.0"
