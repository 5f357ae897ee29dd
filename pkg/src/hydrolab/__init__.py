"""Desk-scale laboratory for the symmetric zero-range process under
diffusive scaling: event-driven simulation, coupling, the nonlinear
diffusion limit, and exact ensemble/entropy functionals."""

__version__ = "0.1.0"
