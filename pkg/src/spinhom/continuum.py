"""Planar continuum surface energies and discrete-vs-continuum boundary-value comparisons."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cellproblem import LatticeSpec, boundary_width, build_cell_problem, _prepare
from .energy import CouplingModel
from .groundstate import solve

__all__ = [
    "PolygonalInterface",
    "PhiTable",
    "ConvexityWarning",
    "surface_energy",
    "chord_length",
    "bvp_continuum_min",
    "GammaResult",
    "gamma_check",
]


class ConvexityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PolygonalInterface:
    """Polyline in the plane; the normal of each segment is its left normal."""

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise ValueError("need at least two planar vertices")
        object.__setattr__(self, "vertices", v)
        if np.any(self.lengths() == 0):
            raise ValueError("degenerate segment: consecutive vertices coincide")

    def segments(self) -> np.ndarray:
        v = self.vertices
        if self.closed:
            return np.roll(v, -1, axis=0) - v
        return np.diff(v, axis=0)

    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.segments(), axis=1)

    def normals(self) -> np.ndarray:
        d = self.segments() / self.lengths()[:, None]
        return np.column_stack([-d[:, 1], d[:, 0]])

    def reversed(self) -> "PolygonalInterface":
        return PolygonalInterface(self.vertices[::-1].copy(), self.closed)


@dataclass(frozen=True)
class PhiTable:
    """Surface tension sampled at angles in ``[0, pi)``, extended by ``phi(-nu) = phi(nu)``.

    ``mode="angle"`` interpolates linearly in the angle. ``mode="homogeneous"``
    interpolates the 1-homogeneous extension linearly in each cone between
    adjacent nodes, which keeps sampled convex integrands convex.
    """

    angles: np.ndarray
    values: np.ndarray
    mode: str = "angle"

    def __post_init__(self):
        a = np.mod(np.asarray(self.angles, dtype=float), np.pi)
        v = np.asarray(self.values, dtype=float)
        if a.shape != v.shape or a.ndim != 1 or len(a) == 0:
            raise ValueError("angles and values must be equal-length 1D arrays")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("surface tension values must be positive and finite")
        if self.mode not in ("angle", "homogeneous"):
            raise ValueError(f"unknown interpolation mode {self.mode!r}")
        order = np.argsort(a, kind="stable")
        a, v = a[order], v[order]
        if np.any(np.diff(a) == 0):
            raise ValueError("duplicate angles")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f, k: int, mode: str = "angle") -> "PhiTable":
        th = np.pi * np.arange(k) / k
        return cls(th, np.array([float(f(np.array([math.cos(x), math.sin(x)]))) for x in th]), mode)

    @classmethod
    def constant(cls, c: float) -> "PhiTable":
        return cls(np.array([0.0]), np.array([float(c)]))

    @classmethod
    def from_sweep(cls, result, use_fit: bool = False, mode: str = "angle") -> "PhiTable":
        ang = np.arctan2(result.nus[:, 1], result.nus[:, 0])
        vals = [e.fit_phi if use_fit else e.extrapolated for e in result.estimates]
        return cls(ang, np.array(vals), mode)

    def scaled(self, alpha: float) -> "PhiTable":
        return PhiTable(self.angles, alpha * self.values, self.mode)

    def __call__(self, nu) -> np.ndarray | float:
        nu = np.asarray(nu, dtype=float)
        single = nu.ndim == 1
        nu = np.atleast_2d(nu)
        th = np.mod(np.arctan2(nu[:, 1], nu[:, 0]), np.pi)
        if len(self.angles) == 1:
            out = np.full(len(th), self.values[0])
        elif self.mode == "angle":
            out = np.interp(th, self.angles, self.values, period=np.pi)
        else:
            out = self._homogeneous(th)
        return float(out[0]) if single else out

    def _homogeneous(self, th):
        a = np.concatenate([self.angles, [self.angles[0] + np.pi]])
        v = np.concatenate([self.values, [self.values[0]]])
        # angles below the first node wrap into the last cone
        th = np.where(th < a[0], th + np.pi, th)
        j = np.clip(np.searchsorted(a, th, side="right") - 1, 0, len(a) - 2)
        a0, a1 = a[j], a[j + 1]
        # x = s e(a0) + w e(a1); Phi(x) = s v0 + w v1
        span = np.sin(a1 - a0)
        s = np.sin(a1 - th) / span
        w = np.sin(th - a0) / span
        return s * v[j] + w * v[j + 1]

    def homogeneous(self, x) -> np.ndarray:
        """1-homogeneous extension ``|x| phi(x / |x|)``; zero at the origin."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        out = np.zeros(len(x))
        nz = r > 0
        out[nz] = r[nz] * self(x[nz] / r[nz, None])
        return out

    def convexity_defect(self, n_random: int = 2000, seed: int = 0) -> float:
        """Worst relative violation of ``Phi(a + b) <= Phi(a) + Phi(b)`` over test pairs."""
        rng = np.random.default_rng(seed)
        dense = np.pi * np.arange(4 * max(len(self.angles), 8)) / (4 * max(len(self.angles), 8))
        th = np.concatenate([self.angles, dense])
        e = np.column_stack([np.cos(th), np.sin(th)])
        i, j = np.triu_indices(len(e), 1)
        A = np.concatenate([e[i], rng.normal(size=(n_random, 2))])
        B = np.concatenate([e[j], rng.normal(size=(n_random, 2))])
        lhs = self.homogeneous(A + B)
        rhs = self.homogeneous(A) + self.homogeneous(B)
        return float(np.max((lhs - rhs) / np.maximum(rhs, 1e-300)))

    def is_convex(self, tol: float = 1e-6) -> bool:
        return self.convexity_defect() <= tol

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["angle_rad", "phi"])
            for a, v in zip(self.angles, self.values):
                w.writerow([repr(float(a)), repr(float(v))])

    @classmethod
    def load_csv(cls, path, mode: str = "angle") -> "PhiTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"angle_rad", "phi"}:
            raise ValueError("phi table CSV needs columns angle_rad,phi")
        return cls(np.array([float(r["angle_rad"]) for r in rows]), np.array([float(r["phi"]) for r in rows]), mode)


def surface_energy(interface: PolygonalInterface, phi: PhiTable) -> float:
    return math.fsum((interface.lengths() * phi(interface.normals())).tolist())


def chord_length(side: float, nu, offset: float = 0.0) -> float:
    """Length of ``{<x, nu> = offset}`` inside the open square ``(-side/2, side/2)^2``."""
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    base = offset * nu
    tau = np.array([-nu[1], nu[0]])
    h = side / 2
    lo, hi = -math.inf, math.inf
    for i in range(2):
        if abs(tau[i]) < 1e-15:
            if abs(base[i]) >= h - 1e-12:
                return 0.0
            continue
        a, b = sorted(((-h - base[i]) / tau[i], (h - base[i]) / tau[i]))
        lo, hi = max(lo, a), min(hi, b)
    return float(max(0.0, hi - lo))


def bvp_continuum_min(side: float, nu, phi: PhiTable, offset: float = 0.0, tol: float = 1e-6) -> float:
    """Chord length times ``phi(nu)`` for the planar two-phase datum on a centred square.

    Warns with :class:`ConvexityWarning` when the table is not convex; the
    chord value is returned regardless.
    """
    if side <= 0:
        raise ValueError("square side must be positive")
    defect = phi.convexity_defect()
    if defect > tol:
        warnings.warn(f"phi table not convex (subadditivity defect {defect:.3g}); chord may not be minimal", ConvexityWarning, stacklevel=2)
    return float(chord_length(side, nu, offset) * phi(np.asarray(nu, dtype=float)))


@dataclass
class GammaResult:
    rows: list  # dicts with eps, discrete_min, continuum_min, rel_gap

    @property
    def gaps(self) -> list:
        return [r["rel_gap"] for r in self.rows]

    @property
    def monotone(self) -> bool | None:
        g = self.gaps
        if len(g) < 2:
            return None
        return all(b < a for a, b in zip(g, g[1:]))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "discrete_min", "continuum_min", "rel_gap"])
            for r in self.rows:
                w.writerow([repr(r["eps"]), repr(r["discrete_min"]), repr(r["continuum_min"]), repr(r["rel_gap"])])


def gamma_check(eps_list, side: float, nu, lattice: LatticeSpec, model: CouplingModel, phi: PhiTable, seeds=(0,)) -> GammaResult:
    """Discrete Dirichlet minima on the square of the given side at each scale ``eps``.

    At scale ``eps`` the problem equals the unit-scale cell problem of side
    ``side / eps`` with frozen width ``max(L + r, eps**-0.5)``, times
    ``eps**(n-1)``; random lattices are averaged over ``seeds``.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    nu = np.asarray(nu, dtype=float)
    n = len(nu)
    if n != 2:
        raise ValueError("boundary-value comparison is two-dimensional")
    cont = bvp_continuum_min(side, nu, phi)
    center = np.zeros(n)
    rows = []
    for eps in eps_list:
        t = side / eps
        boundary_width(t, model, lattice.r)
        l = max(model.L + lattice.r, math.sqrt(1 / eps))
        if l >= t / 2:
            raise ValueError(f"boundary layer {l} too wide for scale eps = {eps}")
        vals = []
        for s in seeds:
            ps, graph = _prepare(lattice, model, t, int(s), [center], [nu])
            vals.append(solve(build_cell_problem(ps, graph, model, nu, t, l, center)).energy * eps ** (n - 1))
        dmin = float(np.mean(vals))
        rows.append({"eps": eps, "discrete_min": dmin, "continuum_min": cont, "rel_gap": float(abs(dmin - cont) / cont) if cont else math.inf})
    return GammaResult(rows)
