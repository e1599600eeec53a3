"""Compiled inner loops (numba) for the distance transform, grid H1 and assignment."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def edt_sites(sx, sy, xs, ys):
    """Exact Euclidean distance from grid nodes to the nearest of a set of sites.

    Sites need not lie on the grid.  ``sy`` must be sorted ascending (``sx``
    permuted alongside).  For each column the squared distance is the lower
    envelope of the parabolas ``(y - sy_k)^2 + (x - sx_k)^2``, built in linear
    time as in Felzenszwalb & Huttenlocher.  Output shape is ``(len(ys), len(xs))``.
    """
    m = sx.shape[0]
    ny, nx = ys.shape[0], xs.shape[0]
    out = np.empty((ny, nx))
    g = np.empty(m)
    v = np.empty(m, dtype=np.int64)
    z = np.empty(m + 1)
    for j in range(nx):
        x = xs[j]
        for q in range(m):
            d = x - sx[q]
            g[q] = d * d
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, m):
            skip = False
            s = -np.inf
            while k >= 0:
                p = v[k]
                if sy[q] == sy[p]:
                    if g[q] < g[p]:
                        k -= 1
                        continue
                    skip = True
                    break
                s = ((g[q] + sy[q] * sy[q]) - (g[p] + sy[p] * sy[p])) / (2.0 * (sy[q] - sy[p]))
                if s <= z[k]:
                    k -= 1
                    continue
                break
            if skip:
                continue
            k += 1
            v[k] = q
            z[k] = s if k > 0 else -np.inf
            z[k + 1] = np.inf
        k = 0
        for i in range(ny):
            y = ys[i]
            while z[k + 1] < y:
                k += 1
            p = v[k]
            dy = y - sy[p]
            out[i, j] = math.sqrt(g[p] + dy * dy)
    return out


@njit(cache=True)
def _square_reps(f):
    """Max value of every 2x2 square and the flat index of its maximising
    corner (first in lexicographic (row, col) order on ties)."""
    ny, nx = f.shape
    sh, sw = ny - 1, nx - 1
    rep_val = np.empty(sh * sw + 1)
    rep_vtx = np.empty(sh * sw + 1, dtype=np.int64)
    for a in range(sh):
        for b in range(sw):
            best = f[a, b]
            vtx = a * nx + b
            if f[a, b + 1] > best:
                best = f[a, b + 1]
                vtx = a * nx + b + 1
            if f[a + 1, b] > best:
                best = f[a + 1, b]
                vtx = (a + 1) * nx + b
            if f[a + 1, b + 1] > best:
                best = f[a + 1, b + 1]
                vtx = (a + 1) * nx + b + 1
            rep_val[a * sw + b] = best
            rep_vtx[a * sw + b] = vtx
    rep_val[sh * sw] = np.inf
    rep_vtx[sh * sw] = -1
    return rep_val, rep_vtx


@njit(cache=True)
def _h1_from_order(f, vorder):
    ny, nx = f.shape
    sh, sw = ny - 1, nx - 1
    outside = sh * sw
    n_v = ny * nx
    rv, rx = _square_reps(f)
    rank = np.empty(n_v, dtype=np.int64)
    for k in range(n_v):
        rank[vorder[k]] = k
    parent = np.arange(outside + 1)
    size = np.ones(outside + 1, dtype=np.int64)
    births = np.empty(outside + 1)
    deaths = np.empty(outside + 1)
    verts = np.empty(outside + 1, dtype=np.int64)
    n_out = 0
    for idx in range(n_v - 1, -1, -1):
        v = vorder[idx]
        i = v // nx
        j = v - i * nx
        fv = f[i, j]
        rv_ = rank[v]
        for side in range(4):
            # edge from v to a lower-ranked neighbour enters at value f[v]
            if side == 0:
                if j + 1 >= nx or rank[v + 1] > rv_:
                    continue
                s0 = (i - 1) * sw + j if i > 0 else outside
                s1 = i * sw + j if i < sh else outside
            elif side == 1:
                if j == 0 or rank[v - 1] > rv_:
                    continue
                s0 = (i - 1) * sw + j - 1 if i > 0 else outside
                s1 = i * sw + j - 1 if i < sh else outside
            elif side == 2:
                if i + 1 >= ny or rank[v + nx] > rv_:
                    continue
                s0 = i * sw + j - 1 if j > 0 else outside
                s1 = i * sw + j if j < sw else outside
            else:
                if i == 0 or rank[v - nx] > rv_:
                    continue
                s0 = (i - 1) * sw + j - 1 if j > 0 else outside
                s1 = (i - 1) * sw + j if j < sw else outside
            # find with path halving
            ra = s0
            while parent[ra] != ra:
                parent[ra] = parent[parent[ra]]
                ra = parent[ra]
            rb = s1
            while parent[rb] != rb:
                parent[rb] = parent[parent[rb]]
                rb = parent[rb]
            if ra == rb:
                continue
            va, vb = rv[ra], rv[rb]
            # elder = larger max, then smaller vertex; outside (inf, -1) always wins
            if va > vb or (va == vb and rx[ra] < rx[rb]):
                young_val, young_vtx = vb, rx[rb]
                old_val, old_vtx = va, rx[ra]
            else:
                young_val, young_vtx = va, rx[ra]
                old_val, old_vtx = vb, rx[rb]
            if young_val > fv:
                births[n_out] = fv
                deaths[n_out] = young_val
                verts[n_out] = young_vtx
                n_out += 1
            # union by size; the surviving root carries the elder's maximum
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
            rv[ra] = old_val
            rx[ra] = old_vtx
    return births[:n_out].copy(), deaths[:n_out].copy(), verts[:n_out].copy()


def grid_h1_pairs(f):
    """1-dimensional persistence of the lower-star filtration of a 2D grid.

    Vertices are grid nodes with values ``f``; edges join 4-neighbours and
    squares fill 2x2 blocks, each taking the max of its vertices.  Holes of a
    sublevel set are the bounded components of its complement, so H1 is
    computed as 0-dimensional persistence of the complement: the squares plus
    an "outside" node are merged through grid edges taken in decreasing
    value, and the elder rule decides which component survives a merge.
    Ranking components strictly by (max value, vertex index) makes the result
    independent of how equal values are ordered.

    Returns ``(birth, death, vertex)`` arrays with ``vertex`` the flat index
    (row * nx + col) of the grid node at which the hole is filled;
    zero-persistence pairs are dropped.
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.shape[0] < 2 or f.shape[1] < 2:
        empty = np.zeros(0)
        return empty, empty, np.zeros(0, dtype=np.int64)
    return _h1_from_order(f, np.argsort(f, axis=None))


@njit(cache=True)
def hungarian(cost):
    """Minimum-cost perfect assignment on a square matrix.

    Shortest augmenting path with dual potentials, O(n^3).  Ties go to the
    lowest column index.  Returns ``col_of_row``.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row
