"""Superposition of eight waves whose fastest member is well separated.

Run: python demos/05_superposition.py
"""
from obslab import CoefficientField, Component, DataCoupling, EvolutionSpec, Grid1D, Scenario
from obslab import superposition_constants
from obslab.observability import geometric_weights

families = [geometric_weights(r, 8) for r in (0.3, 0.4, 0.5)]
speeds = [4.0] + [2 - i / 6 for i in range(7)]
comps = tuple(Component(EvolutionSpec("wave", coeff=CoefficientField.constant(c)), w)
              for c, w in zip(speeds, families[0]))
sc = Scenario(Grid1D(1.0, 99), 0.6, 1.0, 3.0, comps, DataCoupling("linked_identity"), cutoff=24, mode="super")
res = superposition_constants(sc, families, [2, 4, 8])
print(" I  family  theta1   sigma_min")
for I, f, th1, s in res.table:
    print(f"{I:2d}  {f:6d}  {th1:.3f}  {s:.5f}")
print("max/min ratio:", round(res.band(), 3))
