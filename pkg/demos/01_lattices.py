"""Generate the three lattice families, audit them, and inspect Voronoi neighbours."""

from spinhom.lattice import apply_defects, estimate_admissibility, generate_deterministic, generate_perturbed, generate_random_parking
from spinhom.voronoi import build_index, compute_cell, neighbor_graph

square = generate_deterministic("square", 2, [0, 16])
perturbed = generate_perturbed(2, [0, 32], a=0.25, seed=1)
parking = generate_random_parking([0, 32], diameter=1.0, seed=1)

for name, ps in (("square", square), ("perturbed", perturbed), ("parking", parking)):
    rep = estimate_admissibility(ps)
    print(f"{name:10s} points={len(ps):5d} r_min={rep.r_min:.3f} R_cover={rep.R_cover:.3f} pass={rep.passed}")

# a Z^2 Voronoi cell is the unit square around the site
index = build_index(square)
cell = compute_cell(square, index, 8 * 17 + 8)
print("Z2 cell neighbours:", sorted(cell.neighbors()), "perimeter:", cell.measure())

graph = neighbor_graph(perturbed, L=2.0)
print(f"perturbed graph: {len(graph.nn)} nearest-neighbour pairs, {len(graph.lr)} long-range pairs within L=2")

holes = apply_defects(perturbed, count=6, seed=3)
print("after removing 6 points:", len(holes), "points")
