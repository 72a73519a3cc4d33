"""Unconstrained adaptive Metropolis: chain engine, expectation recursions and
verification tools for the stability of the adapted covariance."""
__version__ = "0.1.0"
