"""Ferromagnetic pair couplings, discrete interface energies and tail bounds.

Convention: every unordered pair is counted once, so a broken bond of
coupling c costs ``2 c`` (``|u(x) - u(y)| = 2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import gamma, gammaincc

from .voronoi import NeighborGraph

CONVENTION = "unordered-pairs"

__all__ = [
    "CONVENTION",
    "ModelError",
    "Kernel",
    "CouplingModel",
    "SpinConfig",
    "validate_model",
    "radial_tail",
    "tail_bound",
    "edge_couplings",
    "total_energy",
    "broken_bonds",
]


class ModelError(ValueError):
    """A coupling model violating the growth/integrability hypothesis."""


@dataclass(frozen=True)
class Kernel:
    """Radial long-range profile J(s).

    ``power``: ``beta * max(s, 1)**-p`` (capped at unit distance so that
    J(|x|)|x| is integrable at the origin); ``exp``: ``beta * exp(-s / lam)``.
    """

    family: str = "zero"
    beta: float = 0.0
    p: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if self.family not in ("zero", "power", "exp"):
            raise ModelError(f"unknown kernel family {self.family!r}")
        if self.family != "zero" and self.beta < 0:
            raise ModelError("kernel amplitude beta must be non-negative")
        if self.family == "exp" and self.lam <= 0:
            raise ModelError("exponential decay length must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "zero":
            return np.zeros_like(s)
        if self.family == "power":
            return self.beta * np.maximum(s, 1.0) ** (-self.p)
        return self.beta * np.exp(-np.maximum(s, 0.0) / self.lam)

    def moment(self, a: float, k: int) -> float:
        """Integral of ``J(u) u**k`` over ``[a, inf)`` for ``a >= 0``."""
        if self.family == "zero":
            return 0.0
        if self.family == "power":
            if self.p <= k + 1:
                return math.inf
            head = self.beta * (1.0 - a ** (k + 1)) / (k + 1) if a < 1 else 0.0
            b = max(a, 1.0)
            return head + self.beta * b ** (k + 1 - self.p) / (self.p - k - 1)
        x = a / self.lam
        return self.beta * self.lam ** (k + 1) * gamma(k + 1) * gammaincc(k + 1, x)

    def to_dict(self) -> dict:
        if self.family == "zero":
            return {"family": "zero"}
        if self.family == "power":
            return {"family": "power", "beta": self.beta, "p": self.p}
        return {"family": "exp", "beta": self.beta, "lambda": self.lam}


@dataclass(frozen=True)
class CouplingModel:
    """Nearest-neighbour and long-range coefficients as functions of distance.

    ``c_nn`` is a constant or a callable on separation lengths; for a callable,
    ``C_bound`` must be given.
    """

    c_nn: float | Callable = 1.0
    c_lr: Kernel = field(default_factory=Kernel)
    L: float = 0.0
    C_bound: float | None = None

    def nn(self, dist) -> np.ndarray:
        dist = np.asarray(dist, dtype=float)
        if callable(self.c_nn):
            return np.asarray(self.c_nn(dist), dtype=float)
        return np.full(dist.shape, float(self.c_nn))

    def lr(self, dist) -> np.ndarray:
        return self.c_lr(dist)

    @property
    def bound(self) -> float:
        if self.C_bound is not None:
            return float(self.C_bound)
        if callable(self.c_nn):
            raise ModelError("a radial c_nn needs an explicit C_bound")
        k = float(self.c_nn)
        return max(k, 1 / k) if k > 0 else math.inf

    @property
    def c_min(self) -> float:
        if callable(self.c_nn):
            return 1 / self.bound
        return float(self.c_nn)

    def to_dict(self) -> dict:
        nn = {"const": float(self.c_nn)} if not callable(self.c_nn) else {"radial": getattr(self.c_nn, "__name__", "callable")}
        return {"c_nn": nn, "c_lr": self.c_lr.to_dict(), "L": self.L}


def validate_model(m: CouplingModel, n: int, R: float | None = None) -> None:
    """Raise :class:`ModelError` naming every violated clause; return None if fine."""
    problems = []
    k = m.c_lr
    if k.family == "power" and k.p <= n + 1:
        problems.append(f"power kernel needs p > n + 1 = {n + 1} for integrable J(|x|)|x| (got p = {k.p})")
    if m.L < 0:
        problems.append("truncation radius L must be non-negative")
    try:
        C = m.bound
    except ModelError as exc:
        problems.append(str(exc))
    else:
        if not math.isfinite(C):
            problems.append("c_nn must be strictly positive")
        else:
            s = np.linspace(1e-6, 2 * (R if R else 1.0), 257)
            c = m.nn(s)
            if np.any(c < 1 / C - 1e-12) or np.any(c > C + 1e-12):
                problems.append(f"c_nn leaves [1/C, C] with C = {C}")
    if problems:
        raise ModelError("; ".join(problems))


def _sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def radial_tail(m: CouplingModel, L: float, n: int, R: float) -> float:
    """Continuum tail: integral of ``J(|x|) (|x| + 2R)`` over ``|x| > L``."""
    if L <= 0:
        raise ValueError("L must be positive")
    k = m.c_lr
    return _sphere_area(n) * (k.moment(L, n) + 2 * R * k.moment(L, n - 1))


def _shifted_integral(k: Kernel, lower: float, shift: float, poly: np.ndarray) -> float:
    # integral over s >= lower of J(max(s - shift, 0)) * poly(s)
    q = np.zeros(1)
    # poly(u + shift) expanded in u
    for j, coef in enumerate(poly):
        q = P.polyadd(q, coef * P.polypow([shift, 1.0], j))
    u0 = lower - shift
    total = 0.0
    if u0 < 0:
        anti = P.polyint(q)
        total += float(k(0.0)) * (P.polyval(0.0, anti) - P.polyval(u0, anti))
        u0 = 0.0
    for j, coef in enumerate(q):
        if coef != 0:
            total += coef * k.moment(u0, j)
    return total


def tail_bound(m: CouplingModel, L: float, n: int, R: float, r: float) -> float:
    """Upper bound on the long-range tail beyond the truncation radius ``L``.

    Bounds the grid sum over ``xi`` in ``r' Z^n`` (``r' = r / sqrt(n)``) of
    ``J(|xi_hat|) (|xi| + 2R)`` with ``|xi_hat| >= |xi| - r``, and likewise the
    sum of ``J(|d|) (|d| + 2R)`` over the offsets ``d`` of any r-separated set.
    Either term is dominated by the average of
    ``J(max(|x| - 3r/2, 0)) (|x| + r + 2R)`` over the ``r'``-cell around it, so
    the sum is at most ``r'^-n`` times that integrand integrated over
    ``|x| > L - r``. The radial integral is evaluated in closed form.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    k = m.c_lr
    if k.family == "zero":
        return 0.0
    rp = r / math.sqrt(n)
    poly = P.polymul([r + 2 * R, 1.0], P.polypow([0.0, 1.0], n - 1))
    lower = max(L - r, 0.0)
    return _sphere_area(n) / rp**n * _shifted_integral(k, lower, 1.5 * r, poly)


@dataclass
class SpinConfig:
    """Spins indexed by point; 0 marks an undefined site."""

    values: np.ndarray
    frozen: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        if not np.all(np.isin(self.values, (-1, 0, 1))):
            raise ValueError("spins must be +1, -1 (or 0 for undefined)")
        if self.frozen is None:
            self.frozen = np.zeros(self.values.shape, dtype=bool)
        if np.any(self.frozen & (self.values == 0)):
            raise ValueError("frozen sites must carry a spin")

    def __neg__(self) -> "SpinConfig":
        return SpinConfig(-self.values, self.frozen.copy())


def edge_couplings(graph: NeighborGraph, m: CouplingModel) -> tuple[np.ndarray, np.ndarray]:
    """All interacting pairs (nn first, then lr) and their coefficients."""
    pairs = np.concatenate([graph.nn, graph.lr]).reshape(-1, 2)
    c = np.concatenate([m.nn(graph.nn_dist), m.lr(graph.lr_dist)])
    return pairs, c


def broken_bonds(values: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    return np.abs(values[pairs[:, 0]].astype(np.int64) - values[pairs[:, 1]])


def total_energy(u, graph: NeighborGraph, m: CouplingModel, region=None, eps: float = 1.0) -> float:
    """Surface-scaled energy ``eps^(n-1) * sum c |u(x) - u(y)|`` over pairs inside ``region``.

    ``region`` is a boolean mask or an index array over points (default: all
    points of the graph). Summation is exactly rounded, hence order-free.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    values = u.values if isinstance(u, SpinConfig) else np.asarray(u, dtype=np.int8)
    pairs, c = edge_couplings(graph, m)
    if region is None:
        inside = np.ones(len(pairs), dtype=bool)
        needed = graph.active
    else:
        mask = np.asarray(region)
        if mask.dtype != bool:
            full = np.zeros(len(values), dtype=bool)
            full[mask] = True
            mask = full
        inside = mask[pairs[:, 0]] & mask[pairs[:, 1]] if len(pairs) else np.zeros(0, dtype=bool)
        needed = np.flatnonzero(mask)
    if np.any(values[needed] == 0):
        raise ValueError("spin configuration is missing values inside the region")
    pairs, c = pairs[inside], c[inside]
    n = graph.dim
    return eps ** (n - 1) * math.fsum((c * broken_bonds(values, pairs)).tolist())
