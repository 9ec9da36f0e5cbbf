"""Characteristic sets, separation margins and geometric control times.

Run: python demos/03_symbols_and_gcc.py
"""
from obslab import CoefficientField, EvolutionSpec, PrincipalSymbol, gcc_time, parabolic_project, separation_margin

c1, c4 = CoefficientField.constant(1.0), CoefficientField.constant(4.0)
rep = separation_margin(PrincipalSymbol(EvolutionSpec("wave", coeff=c1)),
                        PrincipalSymbol(EvolutionSpec("wave", coeff=c4)), (0.6, 1.0))
print("two waves, classical margin:", round(rep.margin, 6), rep.witness)

for other in ("heat", "evolution"):
    k = 2 if other == "evolution" else None
    rep = separation_margin(PrincipalSymbol(EvolutionSpec("schrodinger"), "parabolic"),
                            PrincipalSymbol(EvolutionSpec(other, k), "parabolic"), (0.6, 1.0))
    print(f"Schrodinger vs {other}{k or ''}, parabolic margin {rep.margin:.4f}, empty sets {rep.empty}")

print("projection of (1, 1) onto the ellipsoid:", parabolic_project(1.0, 1.0))
for c, omega in ((c1, (0.7, 1.0)), (c4, (0.7, 1.0)), (CoefficientField.piecewise([0.5], [1.0, 4.0]), (0.7, 0.9))):
    print(f"GCC time c={c.to_json()} omega={omega}: {gcc_time(c, omega):.4f}")
