"""Admissible point sets: generators, defects, translation and audits.

All generators are pure functions of their parameters and a 64-bit seed.
Randomness comes from numpy's counter-based Philox generator; the perturbed
lattice keys one Philox counter per integer site so that the realization on
overlapping boxes agrees site by site.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

RNG_NAME = "numpy.Philox4x64-10"

__all__ = [
    "AdmissibilityError",
    "PointSet",
    "AdmissibilityReport",
    "generate_deterministic",
    "generate_perturbed",
    "generate_random_parking",
    "apply_defects",
    "translate",
    "estimate_admissibility",
    "save_lattice",
    "load_lattice",
]


class AdmissibilityError(ValueError):
    """Raised when a point set cannot satisfy its declared constants."""


def _u64(x: int) -> int:
    return int(x) & 0xFFFFFFFFFFFFFFFF


def _as_box(box, dim: int) -> tuple[np.ndarray, np.ndarray]:
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (dim, 1))
    if box.shape != (dim, 2):
        raise ValueError(f"box must be (lo, hi) or one (lo, hi) per axis, got shape {box.shape}")
    lo, hi = box[:, 0].copy(), box[:, 1].copy()
    if np.any(hi <= lo):
        raise ValueError("box must have hi > lo on every axis")
    return lo, hi


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite realization of an admissible lattice inside an axis-aligned box.

    Coordinates are stored as ``base + shift`` with an integer ``shift`` so
    that integer translations compose and invert exactly.
    """

    dim: int
    base: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    r_declared: float
    R_declared: float
    provenance: dict = field(default_factory=dict)
    shift: tuple = ()

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        base = np.array(self.base, dtype=float).reshape(-1, self.dim)
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "box_lo", np.asarray(self.box_lo, dtype=float))
        object.__setattr__(self, "box_hi", np.asarray(self.box_hi, dtype=float))
        shift = tuple(int(s) for s in self.shift) if self.shift else (0,) * self.dim
        object.__setattr__(self, "shift", shift)

    @cached_property
    def points(self) -> np.ndarray:
        pts = self.base + np.asarray(self.shift, dtype=float)
        pts.setflags(write=False)
        return pts

    @property
    def lo(self) -> np.ndarray:
        return self.box_lo + np.asarray(self.shift, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return self.box_hi + np.asarray(self.shift, dtype=float)

    def __len__(self) -> int:
        return self.base.shape[0]

    @cached_property
    def _boundary_dist(self) -> np.ndarray:
        d = np.minimum(self.points - self.lo, self.hi - self.points)
        return np.clip(d.min(axis=1), 0.0, None)

    def boundary_distance(self) -> np.ndarray:
        """Distance of every point to the box boundary (0 outside)."""
        return self._boundary_dist

    def same_points(self, other: "PointSet") -> bool:
        return self.points.shape == other.points.shape and bool(np.array_equal(self.points, other.points))


@dataclass(frozen=True)
class AdmissibilityReport:
    r_min: float
    R_cover: float
    resolution: float
    r_declared: float
    R_declared: float
    n_points: int

    @property
    def pass_r(self) -> bool:
        return self.r_min >= self.r_declared - 1e-9

    @property
    def pass_R(self) -> bool:
        return self.R_cover <= self.R_declared + self.resolution

    @property
    def passed(self) -> bool:
        return self.pass_r and self.pass_R

    def to_dict(self) -> dict:
        return {
            "r_min": self.r_min,
            "R_cover": self.R_cover,
            "resolution": self.resolution,
            "r_declared": self.r_declared,
            "R_declared": self.R_declared,
            "n_points": self.n_points,
            "pass_r": self.pass_r,
            "pass_R": self.pass_R,
            "pass": self.passed,
        }


def _integer_sites(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    axes = [np.arange(math.ceil(a - 1e-12), math.floor(b + 1e-12) + 1) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)


def generate_deterministic(model: str, dim: int, box) -> PointSet:
    """Reference lattices: ``square`` (Z^n) or ``triangular`` (unit, 2D only)."""
    lo, hi = _as_box(box, dim)
    if np.any(hi - lo < 4):
        raise ValueError("box side must be at least 4")
    if model == "square":
        pts = _integer_sites(lo, hi).astype(float)
        r, R = 1.0, math.sqrt(dim) / 2
    elif model == "triangular":
        if dim != 2:
            raise ValueError("triangular lattice is only defined for dim = 2")
        h = math.sqrt(3) / 2
        rows = np.arange(math.ceil(lo[1] / h - 1e-12), math.floor(hi[1] / h + 1e-12) + 1)
        chunks = []
        for j in rows:
            off = 0.5 * (j % 2)
            xs = np.arange(math.ceil(lo[0] - off - 1e-12), math.floor(hi[0] - off + 1e-12) + 1) + off
            chunks.append(np.column_stack([xs, np.full(xs.shape, j * h)]))
        pts = np.concatenate(chunks)
        r, R = 1.0, 1 / math.sqrt(3)
    else:
        raise ValueError(f"unknown deterministic model {model!r}")
    return PointSet(dim, pts, lo, hi, r, R, {"model": model, "seed": 0, "params": {}})


def _site_noise(sites: np.ndarray, seed: int, dim: int) -> np.ndarray:
    """Uniform [0,1)^dim draws keyed by (seed, site) on the Philox counter."""
    out = np.empty((sites.shape[0], dim))
    key = _u64(seed)
    for k, s in enumerate(sites):
        counter = np.array([_u64(s[0]), _u64(s[1]), _u64(s[2]) if dim == 3 else 0, 0], dtype=np.uint64)
        out[k] = np.random.Generator(np.random.Philox(key=key, counter=counter)).random(dim)
    return out


def generate_perturbed(dim: int, box, a: float, seed: int, site_shift=None) -> PointSet:
    """Perturbed Z^n: site i carries the point ``i + w_i`` with w_i uniform on [-a, a]^n.

    ``site_shift`` realizes the shifted realization: the noise for site ``i`` is
    read from the stream of site ``i - site_shift``, so
    ``translate(generate_perturbed(dim, box, a, s), z)`` coincides with
    ``generate_perturbed(dim, box + z, a, s, site_shift=z)``.
    """
    if not 0 <= a < 0.5:
        raise ValueError("perturbation amplitude must satisfy 0 <= a < 1/2")
    lo, hi = _as_box(box, dim)
    if np.any(hi - lo < 4):
        raise ValueError("box side must be at least 4")
    sites = _integer_sites(lo, hi)
    shift = np.zeros(dim, dtype=np.int64) if site_shift is None else np.asarray(site_shift, dtype=np.int64)
    if a > 0:
        w = a * (2.0 * _site_noise(sites - shift, seed, dim) - 1.0)
    else:
        w = np.zeros(sites.shape)
    pts = sites.astype(float) + w
    prov = {"model": "perturbed", "seed": _u64(seed), "params": {"a": a, "rng": RNG_NAME}}
    return PointSet(dim, pts, lo - a, hi + a, 1 - 2 * a, math.sqrt(dim) * (0.5 + a), prov)


def generate_random_parking(box, diameter: float, seed: int, dim: int = 2) -> PointSet:
    """Saturated random sequential adsorption of hard balls of the given diameter.

    Centers are inserted uniformly in the box and rejected on overlap until no
    admissible location is left. Saturation is detected exactly by tracking
    the uncovered region with voxels that are halved while they survive.
    """
    from . import _rsa

    if diameter <= 0:
        raise ValueError("diameter must be positive")
    lo, hi = _as_box(box, dim)
    if np.any(hi - lo < 8 * diameter):
        raise ValueError("box side must be at least 8 diameters")
    rng = np.random.Generator(np.random.Philox(key=_u64(seed)))
    pts = _rsa.saturate(lo, hi, diameter, rng)
    _check_saturation(pts, lo, hi, diameter)
    prov = {"model": "parking", "seed": _u64(seed), "params": {"diameter": diameter, "rng": RNG_NAME}}
    return PointSet(dim, pts, lo, hi, diameter, diameter, prov)


def _probe_grid(lo, hi, spacing):
    # anchored at multiples of the spacing so lattice-aligned holes are hit exactly
    axes = [spacing * np.arange(math.ceil(a / spacing - 1e-9), math.floor(b / spacing + 1e-9) + 1) for a, b in zip(lo, hi)]
    if any(len(ax) == 0 for ax in axes):
        return np.empty((0, len(lo)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _max_empty_distance(tree: cKDTree, lo, hi, spacing, chunk=1 << 18) -> float:
    probes = _probe_grid(lo, hi, spacing)
    out = 0.0
    for k in range(0, len(probes), chunk):
        d, _ = tree.query(probes[k : k + chunk])
        out = max(out, float(d.max()))
    return out


def _check_saturation(pts, lo, hi, diameter):
    grid_res = diameter / 8
    worst = _max_empty_distance(cKDTree(pts), lo, hi, grid_res)
    if worst >= diameter:
        raise AdmissibilityError(f"parking configuration is not saturated (gap {worst:.6f})")


def apply_defects(ps: PointSet, count: int, seed: int, candidates=None, max_attempts: int = 1000) -> PointSet:
    """Delete ``count`` uniformly chosen points, spaced more than 3R apart.

    The spacing keeps the result admissible with covering radius at most 2R.
    ``candidates`` optionally restricts which indices may be deleted.
    """
    if count == 0:
        return ps
    if count < 0 or count > 0.01 * len(ps):
        raise ValueError(f"defect count {count} exceeds 1% of {len(ps)} points")
    pool = np.arange(len(ps)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if count > len(pool):
        raise ValueError("not enough candidate points for the requested defects")
    rng = np.random.Generator(np.random.Philox(key=_u64(seed), counter=[0, 0, 0, 1]))
    spacing = 3 * ps.R_declared
    pts = ps.points
    for _ in range(max_attempts):
        chosen = np.sort(rng.choice(pool, size=count, replace=False))
        if count == 1 or cKDTree(pts[chosen]).query_pairs(spacing, output_type="ndarray").size == 0:
            break
    else:
        raise AdmissibilityError(f"could not place {count} defects with spacing > {spacing:.4g}")
    keep = np.ones(len(ps), dtype=bool)
    keep[chosen] = False
    prov = dict(ps.provenance)
    prov["params"] = dict(prov.get("params", {}))
    prov["params"]["defects"] = {"seed": _u64(seed), "deleted": chosen.tolist(), "rule": "spacing>3R, R->2R"}
    return PointSet(ps.dim, ps.base[keep], ps.box_lo, ps.box_hi, ps.r_declared, 2 * ps.R_declared, prov, ps.shift)


def translate(ps: PointSet, z) -> PointSet:
    z = np.asarray(z)
    if z.shape != (ps.dim,) or not np.all(np.equal(np.mod(z, 1), 0)):
        raise ValueError("translation must be an integer vector of length dim")
    shift = tuple(int(a) + int(b) for a, b in zip(ps.shift, z))
    return PointSet(ps.dim, ps.base, ps.box_lo, ps.box_hi, ps.r_declared, ps.R_declared, ps.provenance, shift)


def estimate_admissibility(ps: PointSet) -> AdmissibilityReport:
    """Measure the minimum distance and the covering radius of the box interior.

    The covering radius is probed on a grid of spacing at most r_min/4 over
    the points of the box farther than ``R_declared`` from its boundary; the
    reported resolution is the probe half-diagonal.
    """
    if len(ps) < 2:
        raise ValueError("admissibility needs at least two points")
    pts = ps.points
    tree = cKDTree(pts)
    d, _ = tree.query(pts, k=2)
    r_min = float(d[:, 1].min())
    base = r_min if r_min >= ps.r_declared / 4 else ps.r_declared
    spacing = min(base, ps.r_declared) / 4
    lo = ps.lo + ps.R_declared
    hi = ps.hi - ps.R_declared
    R_cover = _max_empty_distance(tree, lo, hi, spacing) if np.all(hi >= lo) else 0.0
    return AdmissibilityReport(
        r_min=r_min,
        R_cover=R_cover,
        resolution=spacing * math.sqrt(ps.dim) / 2,
        r_declared=ps.r_declared,
        R_declared=ps.R_declared,
        n_points=len(ps),
    )


def lattice_to_dict(ps: PointSet) -> dict[str, Any]:
    return {
        "dim": ps.dim,
        "box": {"lo": [float(x) for x in ps.lo], "hi": [float(x) for x in ps.hi]},
        "r": ps.r_declared,
        "R": ps.R_declared,
        "provenance": ps.provenance,
        "points": ps.points.tolist(),
    }


def save_lattice(ps: PointSet, path) -> None:
    # json writes floats with repr, i.e. 17 significant digits round-trip
    with open(path, "w") as fh:
        json.dump(lattice_to_dict(ps), fh)
        fh.write("\n")


def lattice_from_dict(data: dict) -> PointSet:
    try:
        dim = int(data["dim"])
        pts = np.asarray(data["points"], dtype=float)
        lo, hi = data["box"]["lo"], data["box"]["hi"]
        r, R = float(data["r"]), float(data["R"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"invalid lattice file: {exc}") from exc
    if pts.size == 0:
        raise ValueError("invalid lattice file: empty points array")
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValueError("invalid lattice file: points do not match dim")
    return PointSet(dim, pts, lo, hi, r, R, data.get("provenance", {}))


def load_lattice(path) -> PointSet:
    with open(path) as fh:
        return lattice_from_dict(json.load(fh))
