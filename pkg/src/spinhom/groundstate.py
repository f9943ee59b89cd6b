"""Exact ground states of ferromagnetic two-spin problems with frozen sites.

A free spin on the source side of a minimum s-t cut takes the value +1. Edge
weights are scaled to integers (``SCALE = 2**20``) so that the flow is
computed in exact arithmetic; reported energies are the scaled integer
optimum divided by ``SCALE``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maxflow import max_flow

SCALE = 1 << 20
BRUTE_FORCE_LIMIT = 22

__all__ = [
    "SCALE",
    "SpinProblem",
    "FlowNetwork",
    "GroundState",
    "assemble",
    "solve",
    "brute_force",
    "config_energy",
]


@dataclass
class SpinProblem:
    """Weighted pair graph on vertices ``0..n-1``; ``frozen`` is 0 (free) or +-1."""

    n: int
    edges: np.ndarray
    weights: np.ndarray
    frozen: np.ndarray
    ids: np.ndarray | None = None  # original point indices, if any

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float)
        self.frozen = np.asarray(self.frozen, dtype=np.int8)
        if self.frozen.shape != (self.n,):
            raise ValueError("frozen must have one entry per vertex")
        if len(self.edges) != len(self.weights):
            raise ValueError("one weight per edge required")
        if len(self.edges) and (self.edges.min() < 0 or self.edges.max() >= self.n):
            raise ValueError("edge endpoint outside the vertex range")

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(self.frozen == 0)

    def negated(self) -> "SpinProblem":
        return SpinProblem(self.n, self.edges, self.weights, -self.frozen, self.ids)


@dataclass
class FlowNetwork:
    n_nodes: int
    u: np.ndarray
    v: np.ndarray
    cap_uv: np.ndarray
    cap_vu: np.ndarray
    source: int
    sink: int
    offset: int  # scaled cost of frozen-frozen edges
    free: np.ndarray  # vertex of each non-terminal node


@dataclass
class GroundState:
    energy: float
    config: np.ndarray  # +-1 per vertex
    optimal: bool
    flow: int
    offset: int
    rounding_bound: float


def _scaled(weights: np.ndarray) -> np.ndarray:
    if np.any(weights < 0):
        raise ValueError("ferromagnetic problems need non-negative weights")
    return np.rint(weights * SCALE).astype(np.int64)


def assemble(problem: SpinProblem) -> FlowNetwork:
    w = _scaled(problem.weights)
    fr = problem.frozen
    free = problem.free
    node = -np.ones(problem.n, dtype=np.int64)
    node[free] = np.arange(len(free))
    k = len(free)
    s, t = k, k + 1
    a, b = problem.edges[:, 0], problem.edges[:, 1]
    fa, fb = fr[a], fr[b]

    both = (fa != 0) & (fb != 0)
    offset = int(w[both & (fa != fb)].sum())

    ff = (fa == 0) & (fb == 0)
    to_source = np.zeros(k, dtype=np.int64)
    to_sink = np.zeros(k, dtype=np.int64)
    for x, fy in ((a, fb), (b, fa)):
        mixed = (fr[x] == 0) & (fy != 0)
        np.add.at(to_source, node[x[mixed & (fy > 0)]], w[mixed & (fy > 0)])
        np.add.at(to_sink, node[x[mixed & (fy < 0)]], w[mixed & (fy < 0)])

    src = np.flatnonzero(to_source)
    snk = np.flatnonzero(to_sink)
    u = np.concatenate([node[a[ff]], np.full(len(src), s), snk])
    v = np.concatenate([node[b[ff]], src, np.full(len(snk), t)])
    cuv = np.concatenate([w[ff], to_source[src], to_sink[snk]])
    cvu = np.concatenate([w[ff], np.zeros(len(src) + len(snk), dtype=np.int64)])
    return FlowNetwork(k + 2, u, v, cuv, cvu, s, t, offset, free)


def config_energy(problem: SpinProblem, config: np.ndarray, scaled: bool = False):
    """Energy of a full +-1 assignment: float, or the exact scaled integer."""
    diff = config[problem.edges[:, 0]] != config[problem.edges[:, 1]]
    if scaled:
        return int(_scaled(problem.weights)[diff].sum())
    return float(np.sum(problem.weights[diff]))


def solve(problem: SpinProblem) -> GroundState:
    net = assemble(problem)
    config = problem.frozen.astype(np.int8).copy()
    if len(net.free) == 0:
        flow = 0
    else:
        flow, side = max_flow(net.n_nodes, net.u, net.v, net.cap_uv, net.cap_vu, net.source, net.sink)
        config[net.free] = np.where(side[: len(net.free)], 1, -1)
    total = flow + net.offset
    optimal = config_energy(problem, config, scaled=True) == total
    return GroundState(
        energy=total / SCALE,
        config=config,
        optimal=bool(optimal),
        flow=flow,
        offset=net.offset,
        rounding_bound=len(problem.weights) / (2 * SCALE),
    )


def brute_force(problem: SpinProblem, chunk: int = 1 << 15) -> tuple[float, int]:
    """Exhaustive minimum over the free spins: (energy, number of minimizers)."""
    free = problem.free
    k = len(free)
    if k > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} free spins (got {k})")
    w = _scaled(problem.weights)
    fr = problem.frozen
    a, b = problem.edges[:, 0], problem.edges[:, 1]
    fa, fb = fr[a], fr[b]
    offset = int(w[(fa != 0) & (fb != 0) & (fa != fb)].sum())
    pos = -np.ones(problem.n, dtype=np.int64)
    pos[free] = np.arange(k)
    # unary costs for a free spin set to +1 / -1
    cost_up = np.zeros(k, dtype=np.int64)
    cost_dn = np.zeros(k, dtype=np.int64)
    for x, fy in ((a, fb), (b, fa)):
        mixed = (fr[x] == 0) & (fy != 0)
        np.add.at(cost_up, pos[x[mixed & (fy < 0)]], w[mixed & (fy < 0)])
        np.add.at(cost_dn, pos[x[mixed & (fy > 0)]], w[mixed & (fy > 0)])
    ff = (fa == 0) & (fb == 0)
    ia, ib, wf = pos[a[ff]], pos[b[ff]], w[ff]

    best, count = None, 0
    shifts = np.arange(k, dtype=np.int64)
    for lo in range(0, 1 << k, chunk):
        codes = np.arange(lo, min(lo + chunk, 1 << k), dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(bool)
        e = np.full(len(codes), offset, dtype=np.int64)
        e += np.where(bits, cost_up, cost_dn).sum(axis=1)
        if len(wf):
            e += ((bits[:, ia] != bits[:, ib]) * wf).sum(axis=1)
        m = int(e.min())
        if best is None or m < best:
            best, count = m, int(np.count_nonzero(e == m))
        elif m == best:
            count += int(np.count_nonzero(e == m))
    return best / SCALE, count
