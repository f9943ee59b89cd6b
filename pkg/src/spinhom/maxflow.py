"""Exact s-t maximum flow on int64 capacities (Dinic, compiled with numba)."""

import numpy as np
from numba import njit


@njit(cache=True)
def _dinic(n, tail, head, res, start, adj, s, t):
    level = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    path = np.empty(n, np.int64)
    flow = 0
    while True:
        level[:] = -1
        level[s] = 0
        qh, qt = 0, 1
        queue[0] = s
        while qh < qt:
            u = queue[qh]
            qh += 1
            for k in range(start[u], start[u + 1]):
                a = adj[k]
                w = head[a]
                if res[a] > 0 and level[w] < 0:
                    level[w] = level[u] + 1
                    queue[qt] = w
                    qt += 1
        if level[t] < 0:
            break
        for u in range(n):
            it[u] = start[u]
        depth = 0
        u = s
        while True:
            if u == t:
                f = res[path[0]]
                for i in range(1, depth):
                    if res[path[i]] < f:
                        f = res[path[i]]
                flow += f
                cut = -1
                for i in range(depth):
                    a = path[i]
                    res[a] -= f
                    res[a ^ 1] += f
                    if cut < 0 and res[a] == 0:
                        cut = i
                depth = cut
                u = tail[path[cut]]
                continue
            found = False
            while it[u] < start[u + 1]:
                a = adj[it[u]]
                w = head[a]
                if res[a] > 0 and level[w] == level[u] + 1:
                    found = True
                    break
                it[u] += 1
            if found:
                path[depth] = adj[it[u]]
                depth += 1
                u = head[path[depth - 1]]
            else:
                if u == s:
                    break
                level[u] = -1
                depth -= 1
                u = tail[path[depth]]
                it[u] += 1
    return flow, level >= 0


def max_flow(n_nodes: int, u, v, cap_uv, cap_vu, s: int, t: int) -> tuple[int, np.ndarray]:
    """Maximum s-t flow; returns (value, source side of a minimum cut).

    Each edge ``(u[e], v[e])`` carries capacity ``cap_uv[e]`` forward and
    ``cap_vu[e]`` backward. All capacities must be non-negative integers.
    """
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    cf = np.asarray(cap_uv, dtype=np.int64)
    cb = np.asarray(cap_vu, dtype=np.int64)
    if np.any(cf < 0) or np.any(cb < 0):
        raise ValueError("capacities must be non-negative")
    m = len(u)
    tail = np.empty(2 * m, np.int64)
    head = np.empty(2 * m, np.int64)
    res = np.empty(2 * m, np.int64)
    tail[0::2], head[0::2], res[0::2] = u, v, cf
    tail[1::2], head[1::2], res[1::2] = v, u, cb
    adj = np.argsort(tail, kind="stable").astype(np.int64)
    start = np.zeros(n_nodes + 1, np.int64)
    np.cumsum(np.bincount(tail, minlength=n_nodes), out=start[1:])
    flow, side = _dinic(n_nodes, tail, head, res, start, adj, s, t)
    return int(flow), side
