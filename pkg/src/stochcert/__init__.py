"""Certified bounds on finite-horizon exit and reach-avoid probabilities of
stochastic discrete-time polynomial systems."""

__version__ = "0.1.0"
