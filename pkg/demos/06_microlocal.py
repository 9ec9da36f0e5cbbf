"""Angular energy densities of high-mode solution families.

Run: python demos/06_microlocal.py
"""
from obslab import EvolutionSpec, Grid1D, PrincipalSymbol, counterexample_demo, localisation_test, mode_family

grid = Grid1D(1.0, 400)
modes = [10, 20, 30, 40, 50, 60]
cases = (
    ("wave", "classical", 2.0, "distance"),
    ("wave", "parabolic", 2.0, "distance"),
    ("heat", "parabolic", 0.05, "distance"),
    ("schrodinger", "parabolic", 0.02, "level"),
)
for kind, scaling, T, criterion in cases:
    spec = EvolutionSpec(kind)
    rows = localisation_test(mode_family(spec, grid, modes, T), PrincipalSymbol(spec, scaling), 0.1,
                             criterion=criterion)
    print(f"{kind:11s} {scaling:9s}", "  ".join(f"m={m}: {fr:.3f}/{rel:.1e}" for m, fr, rel in rows))

res = counterexample_demo([0.5, 0.25, 0.125, 0.0625, 0.0625], 5)
print("\nshare of mass along the f direction")
for (n, a), (_, b), (_, c) in zip(res.fixed_index, res.superposed, res.compliant):
    print(f"n={n}: fixed index {a:.3f}   superposed {b:.3f}   control {c:.3f}")
