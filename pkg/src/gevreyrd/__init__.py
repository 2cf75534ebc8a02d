"""Verification and convergence benchmarks for parametric semilinear
reaction-diffusion solvers: exact multi-index combinatorics, explicit
regularity constants, a P1 fixed-point PDE solver, Gauss / lattice / Monte
Carlo integration over the parameter domain, and finite-difference checks
of the derivative bounds."""

__version__ = "0.1.0"
