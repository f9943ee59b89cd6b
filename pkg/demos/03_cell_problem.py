"""Cell problems: exact Z^2 values, a perturbed lattice, a long-range kernel."""

import math

from spinhom.cellproblem import CellProblemSpec, LatticeSpec, estimate_phi, solve_cell
from spinhom.energy import CouplingModel, Kernel, radial_tail, tail_bound

nn = CouplingModel(1.0)
for t in (16, 32, 64):
    r = solve_cell(CellProblemSpec((0.0, 1.0), t, coupling=nn))
    print(f"Z2 axis t={t}: mu={r.mu}, mu/t={r.mu_norm} (2 + 2/t = {2 + 2 / t})")

diag = (1 / math.sqrt(2), 1 / math.sqrt(2))
e = estimate_phi(diag, [32, 64], [0], nn, LatticeSpec())
print(f"Z2 diagonal: mu/t at t=64 {e.extrapolated:.4f}, fit {e.fit_phi:.4f}, 2*sqrt(2) = {2 * math.sqrt(2):.4f}")

pert = LatticeSpec("perturbed", a=0.25)
e = estimate_phi((0.0, 1.0), [32, 48, 64], range(6), nn, pert)
for t, s in e.stats.items():
    print(f"perturbed t={t:.0f}: mean {s['mean']:.4f} sd {s['sd']:.4f} over {s['count']} seeds")
print(f"1/t fit: phi={e.fit['phi']:.4f}")

lr = CouplingModel(1.0, Kernel("power", 1.0, p=4.0), L=3.0)
e = estimate_phi((0.0, 1.0), [48], range(3), lr, pert)
print(f"with power-law couplings (L=3): mu/t = {e.extrapolated:.4f}")
print(f"tail beyond L=3: radial {radial_tail(lr, 3.0, 2, 1.0):.4f}, lattice-sum bound {tail_bound(lr, 3.0, 2, pert.R, pert.r):.4f}")
