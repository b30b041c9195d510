"""Where in the (alpha, beta) plane is the capillary dissipation nonnegative?

Sweeps the exponent plane, compares the closed-form strong coercivity test
against the sign of the capillary dissipation on a one-mode density family,
and samples the sharp functional inequality that underlies the equivalence.
"""
import numpy as np

from nskorteweg import Grid, Params, State, check_functional_inequality, dissipation_capillary, regime_atlas
from nskorteweg.diagnostics import SHARP_CONSTANT, random_positive_trig

atlas = regime_atlas((0.0, 3.0), (-4.0, 3.0), 0.25)
print(f"atlas {atlas.shape}: {atlas.scc.sum()} SCC points, {atlas.nv.sum()} no-vacuum points")

# coarse text map, beta decreasing downwards; S = SCC only, N = NV only, B = both
for j in range(atlas.shape[1] - 1, -1, -4):
    row = ""
    for i in range(0, atlas.shape[0], 2):
        s, n = atlas.scc[i, j], atlas.nv[i, j]
        row += "B" if s and n else "S" if s else "N" if n else "."
    print(f"beta={atlas.beta[0, j]:+5.2f} {row}")

# inside the SCC band the dissipation is never negative; outside it a one-mode
# family sometimes finds a negative witness, though not for every pair
grid = Grid.for_order(64)
family = [(1 + a * np.sin(2 * np.pi * grid.x)) ** 2 for a in np.linspace(0.1, 0.9, 9)]
for alpha, beta in [(1.0, -1.0), (1.0, 1.0), (0.0, 0.0), (2.0, 3.5)]:
    p = Params(alpha, beta, galerkin_order=64)
    worst = min(dissipation_capillary(State.from_primitive(rho, 0 * rho, p, grid)) for rho in family)
    print(f"(alpha, beta)=({alpha}, {beta}) scc={p.regime().scc}: min D_ab over family = {worst:.4g}")

f = random_positive_trig(2000, 16, 256, rng=1)
ratios = check_functional_inequality(f)
print(f"functional inequality: max ratio {ratios.max():.4f} over 2000 samples, bound {SHARP_CONSTANT}")
