"""Exact permutation-tensor combinatorics and oscillatory-integral experiments
for simultaneous saturation bounds."""

__version__ = "0.1.0"
