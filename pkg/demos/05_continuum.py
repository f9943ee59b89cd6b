"""Continuum surface energy and discrete-to-continuum convergence."""

import math

from spinhom.cellproblem import LatticeSpec
from spinhom.continuum import PhiTable, PolygonalInterface, bvp_continuum_min, gamma_check, surface_energy
from spinhom.energy import CouplingModel

aniso = PhiTable.from_function(lambda v: 2 * abs(v).sum(), 16, mode="homogeneous")
square_loop = PolygonalInterface([[0, 0], [1, 0], [1, 1], [0, 1]], closed=True)
diamond = PolygonalInterface([[1, 0], [0, 1], [-1, 0], [0, -1]], closed=True)
print("unit square perimeter energy:", surface_energy(square_loop, aniso))
print("diamond perimeter energy:", surface_energy(diamond, aniso))
print("straight chord, diagonal normal:", bvp_continuum_min(1.0, (1 / math.sqrt(2), 1 / math.sqrt(2)), aniso))

res = gamma_check([1 / 16, 1 / 32, 1 / 64], 1.0, (0.0, 1.0), LatticeSpec(), CouplingModel(1.0), PhiTable.constant(2.0))
for row in res.rows:
    print(f"eps={row['eps']:.5f} discrete={row['discrete_min']:.5f} continuum={row['continuum_min']:.5f} gap={row['rel_gap']:.5f}")
