"""Direction sweeps: Z^2 is anisotropic, random parking is nearly isotropic."""

from spinhom.cellproblem import LatticeSpec, sweep
from spinhom.continuum import PhiTable
from spinhom.energy import CouplingModel

nn = CouplingModel(1.0)
for name, lat, seeds in (("square", LatticeSpec(), [0]), ("parking", LatticeSpec("parking"), range(4))):
    res = sweep(8, [32, 48], seeds, nn, lat, jobs=2)
    s = res.summary
    print(f"{name:8s} phi in [{s['min']:.3f}, {s['max']:.3f}], spread {s['spread']:.3f}")
    table = PhiTable.from_sweep(res, use_fit=False, mode="homogeneous")
    print(f"         homogeneous interpolation convex: {table.is_convex()}")
