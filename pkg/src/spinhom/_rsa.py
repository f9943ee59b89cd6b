"""Random sequential adsorption to saturation (voxel-tracked available region).

Trial points are drawn uniformly from the union of live voxels, all of equal
size, and rejected on overlap. A voxel dies once a single accepted ball
covers it; when a batch stops killing voxels, every survivor is split in
2^n children. Because live voxels always cover the available region, each
accepted center is uniform on that region, which is exactly the RSA law.
"""

import math

import numpy as np
from numba import njit

_MIN_SIDE_FRACTION = 1e-9


@njit(cache=True)
def _cell_of(p, lo, g, gshape):
    n = p.shape[0]
    flat = 0
    for a in range(n):
        c = int(math.floor((p[a] - lo[a]) / g))
        if c < 0:
            c = 0
        if c >= gshape[a]:
            c = gshape[a] - 1
        flat = flat * gshape[a] + c
    return flat


@njit(cache=True)
def _unflatten(flat, gshape, out):
    n = gshape.shape[0]
    for a in range(n - 1, -1, -1):
        out[a] = flat % gshape[a]
        flat //= gshape[a]


@njit(cache=True)
def _near_any(p, lo, g, gshape, grid, centers, d2, reach):
    n = p.shape[0]
    base = np.empty(n, np.int64)
    _unflatten(_cell_of(p, lo, g, gshape), gshape, base)
    span = 2 * reach + 1
    total = span**n
    idx = np.empty(n, np.int64)
    for k in range(total):
        rem = k
        ok = True
        flat = 0
        for a in range(n):
            off = rem % span - reach
            rem //= span
            c = base[a] + off
            if c < 0 or c >= gshape[a]:
                ok = False
                break
            idx[a] = c
        if not ok:
            continue
        for a in range(n):
            flat = flat * gshape[a] + idx[a]
        j = grid[flat]
        if j >= 0:
            s = 0.0
            for a in range(n):
                t = centers[j, a] - p[a]
                s += t * t
            if s < d2:
                return True
    return False


@njit(cache=True)
def _insert_batch(u, vox, side, lo, hi, d, g, gshape, grid, centers, count):
    n = lo.shape[0]
    m = vox.shape[0]
    d2 = d * d
    p = np.empty(n)
    for row in range(u.shape[0]):
        v = int(u[row, 0] * m)
        if v >= m:
            v = m - 1
        inside = True
        for a in range(n):
            p[a] = lo[a] + (vox[v, a] + u[row, a + 1]) * side
            if p[a] > hi[a]:
                inside = False
        if not inside:
            continue
        if _near_any(p, lo, g, gshape, grid, centers, d2, 2):
            continue
        grid[_cell_of(p, lo, g, gshape)] = count
        for a in range(n):
            centers[count, a] = p[a]
        count += 1
    return count


@njit(cache=True)
def _live_mask(vox, side, lo, hi, d, g, gshape, grid, centers):
    n = lo.shape[0]
    m = vox.shape[0]
    d2 = d * d
    keep = np.ones(m, np.bool_)
    vlo = np.empty(n)
    vhi = np.empty(n)
    mid = np.empty(n)
    base = np.empty(n, np.int64)
    idx = np.empty(n, np.int64)
    ncorner = 2**n
    reach = 3
    span = 2 * reach + 1
    for v in range(m):
        for a in range(n):
            vlo[a] = lo[a] + vox[v, a] * side
            vhi[a] = min(vlo[a] + side, hi[a])
            mid[a] = 0.5 * (vlo[a] + vhi[a])
        empty = False
        for a in range(n):
            if vlo[a] > hi[a]:
                empty = True
        if empty:
            keep[v] = False
            continue
        _unflatten(_cell_of(mid, lo, g, gshape), gshape, base)
        covered = False
        for k in range(span**n):
            rem = k
            ok = True
            for a in range(n):
                c = base[a] + rem % span - reach
                rem //= span
                if c < 0 or c >= gshape[a]:
                    ok = False
                    break
                idx[a] = c
            if not ok:
                continue
            flat = 0
            for a in range(n):
                flat = flat * gshape[a] + idx[a]
            j = grid[flat]
            if j < 0:
                continue
            inside = True
            for corner in range(ncorner):
                s = 0.0
                for a in range(n):
                    x = vhi[a] if (corner >> a) & 1 else vlo[a]
                    t = centers[j, a] - x
                    s += t * t
                if s >= d2:
                    inside = False
                    break
            if inside:
                covered = True
                break
        if covered:
            keep[v] = False
    return keep


def _children(vox: np.ndarray) -> np.ndarray:
    n = vox.shape[1]
    offs = np.array(np.meshgrid(*([[0, 1]] * n), indexing="ij")).reshape(n, -1).T
    return (2 * vox[:, None, :] + offs[None, :, :]).reshape(-1, n)


def saturate(lo: np.ndarray, hi: np.ndarray, d: float, rng: np.random.Generator) -> np.ndarray:
    n = lo.shape[0]
    g = d / math.sqrt(n)
    gshape = (np.floor((hi - lo) / g).astype(np.int64) + 1)
    grid = -np.ones(int(np.prod(gshape)), dtype=np.int64)
    centers = np.empty((grid.size, n))
    count = 0
    vox = np.stack(np.meshgrid(*[np.arange(k) for k in gshape], indexing="ij"), axis=-1).reshape(-1, n)
    vox = vox.astype(np.int64)
    side = g
    while len(vox):
        m = len(vox)
        u = rng.random((max(m, 64), n + 1))
        count = _insert_batch(u, vox, side, lo, hi, d, g, gshape, grid, centers, count)
        vox = vox[_live_mask(vox, side, lo, hi, d, g, gshape, grid, centers)]
        if len(vox) > 0.7 * m:
            if side < _MIN_SIDE_FRACTION * d:
                break
            vox = _children(vox)
            side *= 0.5
            vox = vox[_live_mask(vox, side, lo, hi, d, g, gshape, grid, centers)]
    return centers[:count].copy()
