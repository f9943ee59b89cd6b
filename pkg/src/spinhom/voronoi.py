"""Local Voronoi cells by half-space clipping and the induced interaction graph.

Cells are exact for points at least 2R inside the box: such a cell lies in
B_R(x), so only points within 2R can contribute a bisector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .lattice import AdmissibilityError, PointSet

__all__ = [
    "SpatialIndex",
    "VoronoiCell",
    "NeighborGraph",
    "build_index",
    "compute_cell",
    "neighbor_graph",
    "facet_tolerance",
    "save_graph",
    "load_graph",
]


@dataclass
class SpatialIndex:
    """Occupancy grid of side r/sqrt(n) plus a kd-tree for range queries."""

    side: float
    origin: np.ndarray
    cells: dict
    tree: cKDTree
    R: float

    def within(self, p, radius: float) -> list[int]:
        return self.tree.query_ball_point(p, radius)


def build_index(ps: PointSet) -> SpatialIndex:
    side = ps.r_declared / math.sqrt(ps.dim)
    origin = ps.lo.copy()
    keys = np.floor((ps.points - origin) / side).astype(np.int64)
    cells: dict = {}
    for i, k in enumerate(map(tuple, keys)):
        if k in cells:
            raise AdmissibilityError(
                f"points {cells[k]} and {i} share an r'-cell: minimum distance below r = {ps.r_declared}"
            )
        cells[k] = i
    return SpatialIndex(side, origin, cells, cKDTree(ps.points), ps.R_declared)


def facet_tolerance(R: float, dim: int) -> float:
    return 1e-12 * R ** (dim - 1)


@dataclass
class VoronoiCell:
    owner: int
    vertices: list
    facets: list  # (neighbor index, measure)
    faces: list = field(default_factory=list)  # 3D only: (neighbor, vertex loop)

    def measure(self) -> float:
        """Sum of facet measures: perimeter (2D) or surface area (3D)."""
        return float(sum(m for _, m in self.facets))

    def neighbors(self) -> list[int]:
        return [j for j, _ in self.facets]


def _clip_polygon(verts, labels, m, d, j, tol):
    # keep {z : <z - m, d> <= 0}; labels[i] tags the edge verts[i] -> verts[i+1]
    k = len(verts)
    s = [(v[0] - m[0]) * d[0] + (v[1] - m[1]) * d[1] for v in verts]
    if max(s) <= tol:
        return verts, labels
    out_v, out_l = [], []
    for i in range(k):
        P, Q = verts[i], verts[(i + 1) % k]
        sp, sq = s[i], s[(i + 1) % k]
        lab = labels[i]
        if sp <= tol:
            out_v.append(P)
            if sq <= tol:
                out_l.append(lab)
            else:
                w = sp / (sp - sq)
                out_l.append(lab)
                out_v.append((P[0] + w * (Q[0] - P[0]), P[1] + w * (Q[1] - P[1])))
                out_l.append(j)
        elif sq <= tol:
            w = sp / (sp - sq)
            out_v.append((P[0] + w * (Q[0] - P[0]), P[1] + w * (Q[1] - P[1])))
            out_l.append(lab)
    return out_v, out_l


def _cell_2d(x, others, idx, R):
    h = 1.05 * R
    verts = [(x[0] - h, x[1] - h), (x[0] + h, x[1] - h), (x[0] + h, x[1] + h), (x[0] - h, x[1] + h)]
    labels = [-1, -1, -1, -1]
    tol = 1e-14 * R * R
    for y, j in zip(others, idx):
        d = (y[0] - x[0], y[1] - x[1])
        m = (0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1]))
        verts, labels = _clip_polygon(verts, labels, m, d, j, tol)
    facets: dict = {}
    k = len(verts)
    for i in range(k):
        P, Q = verts[i], verts[(i + 1) % k]
        facets[labels[i]] = facets.get(labels[i], 0.0) + math.hypot(Q[0] - P[0], Q[1] - P[1])
    return verts, facets, []


def _polygon_area_3d(loop) -> float:
    p0 = loop[0]
    acc = np.zeros(3)
    for a, b in zip(loop[1:-1], loop[2:]):
        acc += np.cross(a - p0, b - p0)
    return 0.5 * float(np.linalg.norm(acc))


def _clip_face(loop, m, d, tol):
    s = (loop - m) @ d
    k = len(loop)
    out, cut = [], []
    for i in range(k):
        P, Q = loop[i], loop[(i + 1) % k]
        sp, sq = s[i], s[(i + 1) % k]
        if sp <= tol:
            out.append(P)
            if sp >= -tol:
                cut.append(P)
        if (sp < -tol and sq > tol) or (sp > tol and sq < -tol):
            I = P + (sp / (sp - sq)) * (Q - P)
            out.append(I)
            cut.append(I)
    return out, cut


def _order_on_plane(pts, normal):
    c = np.mean(pts, axis=0)
    e1 = pts[0] - c
    if np.linalg.norm(e1) == 0:
        return pts
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    ang = [math.atan2((p - c) @ e2, (p - c) @ e1) for p in pts]
    return [pts[i] for i in np.argsort(ang)]


def _dedupe(pts, tol):
    out = []
    for p in pts:
        if all(np.linalg.norm(p - q) > tol for q in out):
            out.append(p)
    return out


def _cell_3d(x, others, idx, R):
    h = 1.05 * R
    c = np.array([[dx, dy, dz] for dx in (-h, h) for dy in (-h, h) for dz in (-h, h)]) + x
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    faces = [(-1, np.array([c[q] for q in quad])) for quad in quads]
    tol = 1e-13 * R * R
    for y, j in zip(others, idx):
        d = np.asarray(y) - x
        m = 0.5 * (x + np.asarray(y))
        if max(float(np.max((f - m) @ d)) for _, f in faces) <= tol:
            continue
        new_faces, cut = [], []
        for lab, loop in faces:
            out, cp = _clip_face(loop, m, d, tol)
            cut.extend(cp)
            out = _dedupe(out, 1e-12 * R)
            if len(out) >= 3:
                new_faces.append((lab, np.array(out)))
        cut = _dedupe(cut, 1e-12 * R)
        if len(cut) >= 3:
            new_faces.append((j, np.array(_order_on_plane(cut, d / np.linalg.norm(d)))))
        faces = new_faces
    facets: dict = {}
    for lab, loop in faces:
        facets[lab] = facets.get(lab, 0.0) + _polygon_area_3d(loop)
    verts = _dedupe([p for _, f in faces for p in f], 1e-12 * R)
    return verts, facets, faces


def compute_cell(ps: PointSet, index: SpatialIndex, idx: int) -> VoronoiCell:
    """Voronoi cell of point ``idx``; contacts below the facet tolerance are dropped."""
    R = ps.R_declared
    if ps.boundary_distance()[idx] < 2 * R - 1e-12:
        raise ValueError(f"point {idx} lies closer than 2R to the box boundary")
    x = ps.points[idx]
    cand = [j for j in index.within(x, 2 * R * (1 + 1e-9)) if j != idx]
    pts = ps.points
    cand.sort(key=lambda j: (float(np.sum((pts[j] - x) ** 2)), j))
    others = [tuple(pts[j]) for j in cand]
    if ps.dim == 2:
        verts, facets, faces = _cell_2d(tuple(x), others, cand, R)
    else:
        verts, facets, faces = _cell_3d(x, [pts[j] for j in cand], cand, R)
    tol = facet_tolerance(R, ps.dim)
    if facets.get(-1, 0.0) > tol:
        raise AdmissibilityError(f"cell of point {idx} reaches the clipping box: R_declared too small")
    kept = sorted((j, m) for j, m in facets.items() if j >= 0 and m >= tol)
    return VoronoiCell(idx, verts, kept, faces)


@dataclass
class NeighborGraph:
    """Nearest-neighbor (Voronoi facet) and long-range pairs among active points.

    Pairs are unordered with ``i < j`` and sorted lexicographically.
    """

    L: float
    active: np.ndarray
    nn: np.ndarray  # (k, 2) int
    nn_measure: np.ndarray
    nn_dist: np.ndarray
    lr: np.ndarray  # (m, 2) int
    lr_vec: np.ndarray  # (m, dim) separation points[j] - points[i]

    @property
    def dim(self) -> int:
        return self.lr_vec.shape[1]

    @property
    def lr_dist(self) -> np.ndarray:
        return np.linalg.norm(self.lr_vec, axis=1) if len(self.lr) else np.zeros(0)

    def degrees(self, n_points: int) -> np.ndarray:
        return np.bincount(self.nn.ravel(), minlength=n_points)

    def restrict_lr(self, L: float) -> "NeighborGraph":
        if L > self.L:
            raise ValueError("cannot extend the truncation radius of an existing graph")
        keep = self.lr_dist <= L * (1 + 1e-12)
        return NeighborGraph(L, self.active, self.nn, self.nn_measure, self.nn_dist, self.lr[keep], self.lr_vec[keep])

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "nn": [[int(i), int(j), float(m)] for (i, j), m in zip(self.nn, self.nn_measure)],
            "lr": [[int(i), int(j)] for i, j in self.lr],
        }


def _sorted_pairs(pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def neighbor_graph(ps: PointSet, L: float, subset=None, index: SpatialIndex | None = None) -> NeighborGraph:
    """Interaction graph among ``subset`` (default: all points 2R inside the box)."""
    if L < 0:
        raise ValueError("truncation radius must be non-negative")
    if index is None:
        index = build_index(ps)
    if subset is None:
        active = np.flatnonzero(ps.boundary_distance() >= 2 * ps.R_declared)
    else:
        active = np.unique(np.asarray(subset, dtype=np.int64))
    is_active = np.zeros(len(ps), dtype=bool)
    is_active[active] = True
    nn: dict = {}
    for i in active:
        for j, m in compute_cell(ps, index, int(i)).facets:
            if is_active[j]:
                key = (min(i, j), max(i, j))
                if key not in nn or i == key[0]:
                    nn[key] = m
    keys = sorted(nn)
    nn_pairs = np.array(keys, dtype=np.int64).reshape(-1, 2)
    nn_measure = np.array([nn[k] for k in keys])
    pts = ps.points
    nn_dist = np.linalg.norm(pts[nn_pairs[:, 1]] - pts[nn_pairs[:, 0]], axis=1) if len(keys) else np.zeros(0)

    lr = np.zeros((0, 2), dtype=np.int64)
    if L > 0 and len(active) > 1:
        sub = cKDTree(pts[active])
        loc = sub.query_pairs(L * (1 + 1e-12), output_type="ndarray")
        cand = _sorted_pairs(active[loc]) if len(loc) else lr
        if len(cand):
            code = cand[:, 0] * len(ps) + cand[:, 1]
            nn_code = nn_pairs[:, 0] * len(ps) + nn_pairs[:, 1]
            lr = cand[~np.isin(code, nn_code)]
    lr_vec = pts[lr[:, 1]] - pts[lr[:, 0]] if len(lr) else np.zeros((0, ps.dim))
    return NeighborGraph(float(L), active, nn_pairs, nn_measure, nn_dist, lr, lr_vec)


def save_graph(graph: NeighborGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph.to_dict(), fh)
        fh.write("\n")


def load_graph(path, ps: PointSet) -> NeighborGraph:
    """Rebuild a graph from its JSON form; geometry is re-read from ``ps``."""
    with open(path) as fh:
        data = json.load(fh)
    nn = np.array([[a, b] for a, b, _ in data["nn"]], dtype=np.int64).reshape(-1, 2)
    meas = np.array([m for _, _, m in data["nn"]], dtype=float)
    lr = np.array(data["lr"], dtype=np.int64).reshape(-1, 2)
    pts = ps.points
    active = np.unique(np.concatenate([nn.ravel(), lr.ravel()]))
    nn_dist = np.linalg.norm(pts[nn[:, 1]] - pts[nn[:, 0]], axis=1) if len(nn) else np.zeros(0)
    lr_vec = pts[lr[:, 1]] - pts[lr[:, 0]] if len(lr) else np.zeros((0, ps.dim))
    return NeighborGraph(float(data["L"]), active, nn, meas, nn_dist, lr, lr_vec)
