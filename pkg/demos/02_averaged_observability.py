"""Averaged observation of two waves: coincident versus separated speeds.

With identical operators and weights (1, -1) the observation cancels exactly
and the Gramian vanishes.  Quadrupling the second speed separates the light
cones and the smallest energy-normalized eigenvalue becomes positive.

Run: python demos/02_averaged_observability.py
"""
from obslab import CoefficientField, Component, DataCoupling, EvolutionSpec, Grid1D, Scenario
from obslab import assemble_gramian, observability_constants, weak_constant_sweep


def two_waves(c2, compact=False):
    comps = (
        Component(EvolutionSpec("wave"), 1.0),
        Component(EvolutionSpec("wave", coeff=CoefficientField.constant(c2)), -1.0),
    )
    return Scenario(Grid1D(1.0, 99), 0.6, 1.0, 3.0, comps, DataCoupling("linked_identity"), cutoff=24,
                    compact_terms=compact)


for c2 in (1.0, 4.0):
    rep = observability_constants(assemble_gramian(two_waves(c2)))
    print(f"c2 = {c2}: sigma_min = {rep.sigma_min:.6g}, C_obs = {rep.c_obs:.6g}")

print("\nhigh-frequency sweep, separated speeds (m0, sigma_min, C_obs):")
for row in weak_constant_sweep(two_waves(4.0), range(1, 11)):
    print("  %2d  %.5f  %.5f" % row)
