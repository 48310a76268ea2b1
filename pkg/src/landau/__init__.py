"""Numerical toolkit for the spectral theory of a 3D magnetic Schrodinger operator
with constant field and axisymmetric perturbation: embedded eigenvalues, complex-scaling
resonances, Fermi-golden-rule rates, resonance-state dynamics, Mourre diagnostics, and
Berezin-Toeplitz counting asymptotics."""

__version__ = "0.1.0"
