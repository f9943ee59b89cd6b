"""Oriented-cube cell problems and ensemble estimates of the surface tension.

A cell problem minimizes the unit-scale energy in ``Q_nu(center, t)`` over
spins that agree with the planar datum (+1 where ``<p - center, nu> >= 0``)
on every point within distance ``l`` of the cube boundary, measured in the
sup-metric of the cube's own frame.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import lattice as lat
from .energy import CONVENTION, CouplingModel, edge_couplings, tail_bound
from .groundstate import SpinProblem, config_energy, solve
from .voronoi import NeighborGraph, build_index, neighbor_graph

__all__ = [
    "Frame",
    "LatticeSpec",
    "CellProblemSpec",
    "CellResult",
    "PhiEstimate",
    "frame",
    "boundary_width",
    "cube_coordinates",
    "build_cell_problem",
    "solve_cell",
    "mu",
    "estimate_phi",
    "sweep",
    "translation_check",
    "subadditivity_check",
    "truncation_check",
    "directions",
]

_TOL = 1e-9


@dataclass(frozen=True)
class Frame:
    nu: np.ndarray
    tangents: np.ndarray  # (n-1, n)

    @property
    def matrix(self) -> np.ndarray:
        """Rows: nu, then the tangents."""
        return np.vstack([self.nu, self.tangents])


def frame(nu) -> Frame:
    """Orthonormal frame completing ``nu``.

    2D: the tangent is ``nu`` rotated by +90 degrees. 3D: the last two columns
    of the Householder reflection sending ``e_1`` to ``-sign(nu_1) nu``.
    """
    nu = np.asarray(nu, dtype=float)
    norm = np.linalg.norm(nu)
    if norm == 0:
        raise ValueError("nu must be non-zero")
    if abs(norm - 1) > 1e-9:
        raise ValueError("nu must be a unit vector")
    nu = nu / norm
    if nu.shape == (2,):
        tang = np.array([[-nu[1], nu[0]]])
    elif nu.shape == (3,):
        s = 1.0 if nu[0] >= 0 else -1.0
        v = nu.copy()
        v[0] += s
        H = np.eye(3) - 2 * np.outer(v, v) / (v @ v)
        tang = H[:, 1:].T.copy()
        # Gram-Schmidt pass against nu and each other
        for i in range(2):
            tang[i] -= (tang[i] @ nu) * nu
            for j in range(i):
                tang[i] -= (tang[i] @ tang[j]) * tang[j]
            tang[i] /= np.linalg.norm(tang[i])
    else:
        raise ValueError("nu must have 2 or 3 components")
    return Frame(nu, tang)


def directions(k: int) -> np.ndarray:
    """``k`` unit vectors equi-spaced in angle on the upper half-circle."""
    if k < 1:
        raise ValueError("need at least one direction")
    th = np.pi * np.arange(k) / k
    return np.column_stack([np.cos(th), np.sin(th)])


def boundary_width(t: float, model: CouplingModel, r: float) -> float:
    """``max(L + r, sqrt(t))``: grows without bound but is o(t)."""
    floor = model.L + r
    if t <= 4 * floor:
        raise ValueError(f"cube side t = {t} must exceed 4 (L + r) = {4 * floor}")
    return max(floor, math.sqrt(t))


@dataclass(frozen=True)
class LatticeSpec:
    """Which admissible lattice to draw for every sample."""

    model: str = "square"
    dim: int = 2
    a: float = 0.25
    diameter: float = 1.0
    defects: int = 0

    def __post_init__(self):
        if self.model not in ("square", "triangular", "perturbed", "parking"):
            raise ValueError(f"unknown lattice model {self.model!r}")
        if self.model == "parking" and self.dim != 2:
            raise ValueError("random parking is only supported in 2D")

    @property
    def random(self) -> bool:
        return self.model in ("perturbed", "parking")

    @property
    def r(self) -> float:
        return {"square": 1.0, "triangular": 1.0, "perturbed": 1 - 2 * self.a, "parking": self.diameter}[self.model]

    @property
    def R(self) -> float:
        n = self.dim
        base = {
            "square": math.sqrt(n) / 2,
            "triangular": 1 / math.sqrt(3),
            "perturbed": math.sqrt(n) * (0.5 + self.a),
            "parking": self.diameter,
        }[self.model]
        return 2 * base if self.defects else base

    def generate(self, lo, hi, seed: int, defect_candidates=None) -> lat.PointSet:
        box = np.column_stack([lo, hi])
        if self.model in ("square", "triangular"):
            ps = lat.generate_deterministic(self.model, self.dim, box)
        elif self.model == "perturbed":
            ps = lat.generate_perturbed(self.dim, box, self.a, seed)
        else:
            ps = lat.generate_random_parking(box, self.diameter, seed, dim=self.dim)
        if self.defects:
            cand = None if defect_candidates is None else np.flatnonzero(defect_candidates(ps.points))
            ps = lat.apply_defects(ps, self.defects, seed, candidates=cand)
        return ps

    def to_dict(self) -> dict:
        out = {"model": self.model, "dim": self.dim}
        if self.model == "perturbed":
            out["a"] = self.a
        if self.model == "parking":
            out["diameter"] = self.diameter
        if self.defects:
            out["defects"] = self.defects
        return out


@dataclass(frozen=True)
class CellProblemSpec:
    nu: tuple
    t: float
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    coupling: CouplingModel = field(default_factory=CouplingModel)
    seed: int = 0
    center: tuple | None = None
    l: float | None = None

    def width(self) -> float:
        if self.l is not None:
            if not self.lattice.r + self.coupling.L <= self.l < self.t / 2:
                raise ValueError(f"boundary width l = {self.l} must satisfy L + r <= l < t/2")
            return self.l
        return boundary_width(self.t, self.coupling, self.lattice.r)


@dataclass
class CellResult:
    nu_idx: int
    nu: tuple
    t: float
    seed: int
    mu: float
    mu_norm: float
    n_free: int
    n_frozen: int
    solve_ms: float
    mu_planar: float
    optimal: bool
    center: tuple = ()


def cube_coordinates(points: np.ndarray, fr: Frame, center) -> np.ndarray:
    """Coordinates in the cube frame: column 0 along nu, then the tangents."""
    return (points - np.asarray(center, dtype=float)) @ fr.matrix.T


def _cube_members(points, fr, center, t):
    q = cube_coordinates(points, fr, center)
    sup = np.abs(q).max(axis=1)
    return sup <= t / 2 + _TOL, q, sup


def build_cell_problem(ps: lat.PointSet, graph: NeighborGraph, model: CouplingModel, nu, t: float, l: float, center=None) -> SpinProblem:
    """Spin problem of the closed cube with a frozen layer of width ``l``.

    Edges are all graph pairs with both endpoints in the cube, including
    frozen-frozen pairs; weights are ``2 c``.
    """
    fr = frame(nu)
    center = np.zeros(ps.dim) if center is None else np.asarray(center, dtype=float)
    if l >= t / 2:
        raise ValueError(f"boundary width l = {l} leaves no free spins in a cube of side {t}")
    half_extent = np.abs(fr.matrix).sum(axis=0) * t / 2 + 2 * ps.R_declared
    if np.any(center - half_extent < ps.lo - _TOL) or np.any(center + half_extent > ps.hi + _TOL):
        raise ValueError("cube plus a 2R margin exceeds the lattice box")
    inside, q, sup = _cube_members(ps.points, fr, center, t)
    ids = np.flatnonzero(inside)
    active = np.zeros(len(ps), dtype=bool)
    active[graph.active] = True
    if not np.all(active[ids]):
        raise ValueError("neighbor graph does not cover every point of the cube")
    local = -np.ones(len(ps), dtype=np.int64)
    local[ids] = np.arange(len(ids))
    pairs, c = edge_couplings(graph, model)
    keep = inside[pairs[:, 0]] & inside[pairs[:, 1]] if len(pairs) else np.zeros(0, dtype=bool)
    edges = local[pairs[keep]]
    frozen = np.zeros(len(ids), dtype=np.int8)
    layer = (t / 2 - sup[ids]) <= l + _TOL
    datum = np.where(q[ids, 0] >= -1e-12, 1, -1).astype(np.int8)
    frozen[layer] = datum[layer]
    return SpinProblem(len(ids), edges, 2.0 * c[keep], frozen, ids)


def planar_datum(problem: SpinProblem, ps: lat.PointSet, nu, center=None) -> np.ndarray:
    center = np.zeros(ps.dim) if center is None else np.asarray(center, dtype=float)
    s = (ps.points[problem.ids] - center) @ frame(nu).nu
    return np.where(s >= -1e-12, 1, -1).astype(np.int8)


def _solve_problem(problem: SpinProblem, ps, nu, t, center, nu_idx, seed) -> CellResult:
    t0 = time.perf_counter()
    gs = solve(problem)
    ms = 1000 * (time.perf_counter() - t0)
    if not gs.optimal:
        raise RuntimeError("max-flow certificate failed: flow value differs from cut value")
    planar = config_energy(problem, planar_datum(problem, ps, nu, center))
    n = ps.dim
    n_free = int(np.count_nonzero(problem.frozen == 0))
    return CellResult(
        nu_idx=nu_idx,
        nu=tuple(float(x) for x in nu),
        t=float(t),
        seed=int(seed),
        mu=gs.energy,
        mu_norm=gs.energy / t ** (n - 1),
        n_free=n_free,
        n_frozen=problem.n - n_free,
        solve_ms=ms,
        mu_planar=planar,
        optimal=gs.optimal,
        center=tuple(float(x) for x in center),
    )


def _sample_box(lattice: LatticeSpec, t: float, centers) -> tuple[np.ndarray, np.ndarray, float]:
    # large enough for every orientation of every cube
    half = t * math.sqrt(lattice.dim) / 2
    margin = 2 * lattice.R + 1.0
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    return centers.min(axis=0) - half - margin, centers.max(axis=0) + half + margin, half


def _prepare(lattice: LatticeSpec, model: CouplingModel, t: float, seed: int, centers, nus) -> tuple:
    lo, hi, half = _sample_box(lattice, t, centers)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))

    def region(points):
        if len(nus) == 1:
            fr = frame(nus[0])
            return np.any([_cube_members(points, fr, c, t)[0] for c in centers], axis=0)
        d = np.min([np.linalg.norm(points - c, axis=1) for c in centers], axis=0)
        return d <= half + _TOL

    ps = lattice.generate(lo, hi, seed, defect_candidates=region)
    graph = neighbor_graph(ps, model.L, subset=np.flatnonzero(region(ps.points)), index=build_index(ps))
    return ps, graph


def _run_unit(args) -> list[CellResult]:
    lattice, model, t, seed, nus, nu_ids, center, l_override = args
    ps, graph = _prepare(lattice, model, t, seed, [center], nus)
    l = l_override if l_override is not None else boundary_width(t, model, lattice.r)
    out = []
    for k, nu in zip(nu_ids, nus):
        prob = build_cell_problem(ps, graph, model, nu, t, l, center)
        out.append(_solve_problem(prob, ps, nu, t, center, k, seed))
    return out


def solve_cell(spec: CellProblemSpec) -> CellResult:
    center = np.zeros(spec.lattice.dim) if spec.center is None else np.asarray(spec.center, dtype=float)
    l = spec.width()
    return _run_unit((spec.lattice, spec.coupling, spec.t, spec.seed, [np.asarray(spec.nu, float)], [0], center, l))[0]


def mu(spec: CellProblemSpec) -> float:
    """Exact cell-problem minimum at unit scale."""
    return solve_cell(spec).mu


@dataclass
class PhiEstimate:
    nu: tuple
    samples: list
    stats: dict  # t -> {"mean", "sd", "count"}
    extrapolated: float
    fit: dict | None
    failures: list = field(default_factory=list)
    convention: str = CONVENTION

    @property
    def fit_phi(self) -> float:
        return self.fit["phi"] if self.fit else self.extrapolated


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    return {"mean": float(np.mean(v)), "sd": sd, "count": int(len(v))}


def _fit_inverse_t(ts, means) -> dict | None:
    ts = np.asarray(ts, dtype=float)
    if len(np.unique(ts)) < 2:
        return None
    A = np.column_stack([np.ones_like(ts), 1 / ts])
    coef, *_ = np.linalg.lstsq(A, np.asarray(means), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - means) ** 2)))
    return {"phi": float(coef[0]), "a": float(coef[1]), "rms_residual": resid}


def _summarize(nu, samples, failures) -> PhiEstimate:
    ts = sorted({s.t for s in samples})
    stats = {t: _stats([s.mu_norm for s in samples if s.t == t]) for t in ts}
    extrap = stats[ts[-1]]["mean"] if ts else math.nan
    fit = _fit_inverse_t(ts, [stats[t]["mean"] for t in ts])
    return PhiEstimate(tuple(float(x) for x in nu), samples, stats, extrap, fit, failures)


def _execute(units, jobs: int):
    results, failures = [], []
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_unit, u) for u in units]
            outcomes = []
            for u, f in zip(units, futures):
                try:
                    outcomes.append((u, f.result(), None))
                except Exception as exc:  # per-sample failures are recorded, not fatal
                    outcomes.append((u, None, exc))
    else:
        outcomes = []
        for u in units:
            try:
                outcomes.append((u, _run_unit(u), None))
            except Exception as exc:
                outcomes.append((u, None, exc))
    for u, res, exc in outcomes:
        if exc is None:
            results.extend(res)
        else:
            failures.append({"t": u[2], "seed": u[3], "error": f"{type(exc).__name__}: {exc}"})
    results.sort(key=lambda s: (s.nu_idx, s.t, s.seed))
    return results, failures


def _check_t_list(t_list):
    t_list = [float(t) for t in t_list]
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t_list must be strictly increasing")
    return t_list


def estimate_phi(nu, t_list, seeds, model: CouplingModel, lattice: LatticeSpec, center=None, l=None, jobs: int = 1) -> PhiEstimate:
    """Normalized cell minima ``mu / t^(n-1)`` for every (t, seed), with statistics."""
    t_list = _check_t_list(t_list)
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    nu = np.asarray(nu, dtype=float)
    center = np.zeros(lattice.dim) if center is None else np.asarray(center, dtype=float)
    units = [(lattice, model, t, int(s), [nu], [0], center, l) for t in t_list for s in seeds]
    samples, failures = _execute(units, jobs)
    return _summarize(nu, samples, failures)


@dataclass
class SweepResult:
    nus: np.ndarray
    estimates: list

    @property
    def values(self) -> np.ndarray:
        return np.array([e.extrapolated for e in self.estimates])

    @property
    def summary(self) -> dict:
        v = self.values
        mean = float(v.mean())
        return {
            "max": float(v.max()),
            "min": float(v.min()),
            "mean": mean,
            "spread": float((v.max() - v.min()) / mean) if mean else math.nan,
            "argmax": int(v.argmax()),
            "argmin": int(v.argmin()),
        }


def sweep(k, t_list, seeds, model: CouplingModel, lattice: LatticeSpec, center=None, l=None, jobs: int = 1) -> SweepResult:
    """One estimate per direction, sharing each (t, seed) lattice across directions.

    ``k`` is a direction count (angles ``pi j / k``) or an explicit array of
    unit vectors.
    """
    nus = directions(k) if np.isscalar(k) else np.asarray(k, dtype=float)
    if nus.shape[1] != 2:
        raise ValueError("direction sweeps are two-dimensional")
    t_list = _check_t_list(t_list)
    center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    ids = list(range(len(nus)))
    units = [(lattice, model, t, int(s), list(nus), ids, center, l) for t in t_list for s in seeds]
    samples, failures = _execute(units, jobs)
    ests = [_summarize(nu, [s for s in samples if s.nu_idx == i], failures) for i, nu in enumerate(nus)]
    return SweepResult(nus, ests)


def _rel_spread(values) -> float:
    v = np.asarray(values, dtype=float)
    worst = 0.0
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            worst = max(worst, abs(v[i] - v[j]) / max(abs(v[i]), abs(v[j])))
    return worst


def translation_check(nu, t, seeds, offsets, model: CouplingModel, lattice: LatticeSpec, box=None) -> dict:
    """Seed-mean ``mu_norm`` for cubes centred at each integer offset of one realization.

    ``box`` optionally fixes the lattice box; offsets whose cube does not fit
    raise ``ValueError``.
    """
    nu = np.asarray(nu, dtype=float)
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    l = boundary_width(t, model, lattice.r)
    fr = frame(nu)
    per_offset = {i: [] for i in range(len(offsets))}
    for s in seeds:
        if box is None:
            lo, hi, _ = _sample_box(lattice, t, offsets)
        else:
            box = np.asarray(box, dtype=float).reshape(lattice.dim, 2)
            lo, hi = box[:, 0], box[:, 1]
        ext = np.abs(fr.matrix).sum(axis=0) * t / 2 + 2 * lattice.R
        for c in offsets:
            if np.any(c - ext < lo) or np.any(c + ext > hi):
                raise ValueError(f"offset {c.tolist()} puts the cube outside the lattice box")

        def region(points):
            return np.any([_cube_members(points, fr, c, t)[0] for c in offsets], axis=0)

        ps = lattice.generate(lo, hi, int(s), defect_candidates=region)
        graph = neighbor_graph(ps, model.L, subset=np.flatnonzero(region(ps.points)))
        for i, c in enumerate(offsets):
            prob = build_cell_problem(ps, graph, model, nu, t, l, c)
            per_offset[i].append(_solve_problem(prob, ps, nu, t, c, 0, s))
    means = [float(np.mean([r.mu_norm for r in per_offset[i]])) for i in range(len(offsets))]
    return {
        "offsets": offsets.tolist(),
        "means": means,
        "samples": per_offset,
        "max_rel_deviation": _rel_spread(means),
    }


def _subcube_centers(fr: Frame, t: float, center) -> np.ndarray:
    n = fr.nu.shape[0]
    signs = np.array(np.meshgrid(*([[-0.5, 0.5]] * (n - 1)), indexing="ij")).reshape(n - 1, -1).T
    return center + t * signs @ fr.tangents


def subadditivity_check(nu, t, seed, model: CouplingModel, lattice: LatticeSpec, center=None) -> dict:
    """Compare ``mu(Q(2t))`` with the sum over the 2^(n-1) side-t cubes tiling its central slab.

    All cubes use the boundary width of the side-t cube. ``K_eff`` is the
    smallest K with ``mu(2t) <= sum mu(sub) + K t^(n-2) * (#internal interfaces)``.
    """
    nu = np.asarray(nu, dtype=float)
    n = len(nu)
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    fr = frame(nu)
    l = boundary_width(t, model, lattice.r)
    ps, graph = _prepare(lattice, model, 2 * t, int(seed), [center], [nu])
    big = build_cell_problem(ps, graph, model, nu, 2 * t, l, center)
    mu_big = solve(big).energy
    subs = []
    for c in _subcube_centers(fr, t, center):
        subs.append(solve(build_cell_problem(ps, graph, model, nu, t, l, c)).energy)
    interfaces = 1 if n == 2 else 4
    excess = mu_big - sum(subs)
    K_eff = max(0.0, excess / (t ** (n - 2) * interfaces))
    return {"mu_big": mu_big, "mu_sub": subs, "excess": excess, "interfaces": interfaces, "K_eff": K_eff}


def truncation_check(nu, t, seeds, L_list, L_ref, model: CouplingModel, lattice: LatticeSpec) -> dict:
    """Cell minima for truncation radii ``L_list`` against the reference radius ``L_ref``.

    Every radius uses the frozen-layer width required by ``L_ref`` so the
    constraint sets coincide and only interactions change.
    """
    nu = np.asarray(nu, dtype=float)
    n = len(nu)
    L_list = sorted(float(L) for L in L_list)
    if L_list[-1] > L_ref:
        raise ValueError("reference radius must be the largest")
    ref_model = replace(model, L=L_ref)
    l = boundary_width(t, ref_model, lattice.r)
    center = np.zeros(n)
    rows = []
    for s in seeds:
        ps, graph = _prepare(lattice, ref_model, t, int(s), [center], [nu])
        mus = {}
        for L in L_list + [L_ref]:
            g = graph.restrict_lr(L)
            mus[L] = solve(build_cell_problem(ps, g, replace(model, L=L), nu, t, l, center)).energy
        rows.append({"seed": int(s), "mu": mus})
    scale = t ** (n - 1)
    checks = []
    for row in rows:
        m = row["mu"]
        dens = m[L_ref] / scale / model.c_min
        for L in L_list:
            gap = (m[L_ref] - m[L]) / scale
            bound = float(tail_bound(model, L, n, lattice.R, lattice.r) * dens)
            checks.append({"seed": row["seed"], "L": L, "gap": gap, "bound": bound, "ok": bool(gap <= bound)})
    seq = [m for row in rows for m in [[row["mu"][L] for L in L_list + [L_ref]]]]
    monotone = all(all(b >= a for a, b in zip(r, r[1:])) for r in seq)
    mean_gap = [float(np.mean([(row["mu"][L_ref] - row["mu"][L]) / scale for row in rows])) for L in L_list]
    return {
        "L": L_list,
        "L_ref": L_ref,
        "l": l,
        "rows": rows,
        "checks": checks,
        "monotone": monotone,
        "mean_gap": mean_gap,
        "gap_strictly_decreasing": all(b < a for a, b in zip(mean_gap, mean_gap[1:])),
    }
