"""roughheat: a desk-scale laboratory for the 1-D stochastic heat equation
driven by noise white in time and fractional in space, Hurst 1/4 < H < 1/2.

The package simulates the equation, samples the Gaussian field solved by
the constant-coefficient case exactly, and checks the quantitative
structure around it: kernel estimates, covariance and metric identities,
sup-growth and Holder scaling, weighted norms, and fixed-point
convergence of the mild formulation.
"""

from .params import Grid, Hurst, Weight

__version__ = "0.1.0"

__all__ = ["Grid", "Hurst", "Weight", "__version__"]
