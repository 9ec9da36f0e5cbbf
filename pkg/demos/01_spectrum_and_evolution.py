"""Eigenmodes of -(c u')' and modal evolution of the four component kinds.

Run: python demos/01_spectrum_and_evolution.py
"""
import numpy as np

from obslab import CoefficientField, EvolutionSpec, Grid1D, build_elliptic, eigendecompose, modal_propagator

grid = Grid1D(1.0, 99)
basis = eigendecompose(build_elliptic(grid, CoefficientField.constant(1.0)), 5)
h = grid.h
exact = 4 / h**2 * np.sin(np.arange(1, 6) * np.pi * h / 2) ** 2
print("first eigenvalues      ", np.round(basis.eigenvalues, 6))
print("three-point closed form", np.round(exact, 6))

# A k-th order mode y^(k) + mu y = 0 is propagated through its characteristic roots.
lam = basis.eigenvalues[0]
for kind, k in (("wave", None), ("heat", None), ("schrodinger", None), ("evolution", 3)):
    P = modal_propagator(EvolutionSpec(kind, k), lam, 0.1)
    print(f"{kind:12s} k={P.shape[0]}  |P(0.1)| row 0 = {np.round(np.abs(P[0]), 5)}")

# Piecewise coefficients move the spectrum but keep it simple and positive.
pw = eigendecompose(build_elliptic(grid, CoefficientField.piecewise([0.5], [1.0, 4.0])), 5)
print("piecewise {1, 4} eigenvalues", np.round(pw.eigenvalues, 3))
