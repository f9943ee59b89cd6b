"""Exact ground states and homogenized surface tension of ferromagnetic spin systems on admissible lattices."""

__version__ = "0.1.0"

from .cellproblem import (
    CellProblemSpec,
    LatticeSpec,
    PhiEstimate,
    boundary_width,
    estimate_phi,
    frame,
    mu,
    subadditivity_check,
    sweep,
    translation_check,
    truncation_check,
)
from .continuum import PhiTable, PolygonalInterface, bvp_continuum_min, gamma_check, surface_energy
from .energy import CONVENTION, CouplingModel, Kernel, tail_bound, total_energy, validate_model
from .groundstate import SpinProblem, brute_force, solve
from .lattice import (
    PointSet,
    apply_defects,
    estimate_admissibility,
    generate_deterministic,
    generate_perturbed,
    generate_random_parking,
    load_lattice,
    save_lattice,
    translate,
)
from .voronoi import compute_cell, neighbor_graph
