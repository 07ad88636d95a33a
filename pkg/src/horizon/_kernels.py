"""Compiled inner loops for the lattice distance engines.

One label-setting march serves both engines. With ``use_triangles`` off it
is plain Dijkstra on the stencil graph. With it on, every tentative value is
also offered the first-order simplex update across the two stencil edges
that bracket a direction (ordered upwind / fast marching on the stencil fan).
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _less(dist, a, b):
    da = dist[a]
    db = dist[b]
    return da < db or (da == db and a < b)


@njit(cache=True, nogil=True)
def _sift_up(heap, pos, dist, i):
    node = heap[i]
    while i > 0:
        parent = (i - 1) >> 1
        pn = heap[parent]
        if _less(dist, node, pn):
            heap[i] = pn
            pos[pn] = i
            i = parent
        else:
            break
    heap[i] = node
    pos[node] = i


@njit(cache=True, nogil=True)
def _sift_down(heap, pos, dist, i, size):
    node = heap[i]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        if child + 1 < size and _less(dist, heap[child + 1], heap[child]):
            child += 1
        cn = heap[child]
        if _less(dist, cn, node):
            heap[i] = cn
            pos[cn] = i
            i = child
        else:
            break
    heap[i] = node
    pos[node] = i


@njit(cache=True, nogil=True)
def _simplex(ta, tb, ax, ay, bx, by):
    """min over l in [0,1] of l*ta + (1-l)*tb + |l*a + (1-l)*b| (interior only)."""
    dx = ax - bx
    dy = ay - by
    dd = dx * dx + dy * dy
    k = tb - ta
    if k * k >= dd:
        return math.inf
    bd = bx * dx + by * dy
    bb = bx * bx + by * by
    qa = dd * (dd - k * k)
    qb = 2.0 * bd * (dd - k * k)
    qc = bd * bd - k * k * bb
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        disc = 0.0
    sq = math.sqrt(disc)
    best = math.inf
    for sgn in (-1.0, 1.0):
        lam = (-qb + sgn * sq) / (2.0 * qa)
        if lam <= 0.0 or lam >= 1.0:
            continue
        px = bx + lam * dx
        py = by + lam * dy
        val = tb - lam * k + math.sqrt(px * px + py * py)
        if val < best:
            best = val
    return best


@njit(cache=True, nogil=True)
def march(nu, nv, periodic, hu, hv, scale_half, offsets, use_triangles, sources, source_values, target):
    n = nu * nv
    K = offsets.shape[0]
    dist = np.full(n, np.inf)
    state = np.zeros(n, dtype=np.int8)  # 0 far, 1 trial, 2 accepted
    heap = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    size = 0
    for i in range(sources.shape[0]):
        s = sources[i]
        if source_values[i] < dist[s]:
            dist[s] = source_values[i]
        if state[s] == 0:
            state[s] = 1
            heap[size] = s
            pos[s] = size
            size += 1
            _sift_up(heap, pos, dist, size - 1)
        else:
            _sift_up(heap, pos, dist, pos[s])
    while size > 0:
        y = heap[0]
        size -= 1
        if size > 0:
            heap[0] = heap[size]
            pos[heap[0]] = 0
            _sift_down(heap, pos, dist, 0, size)
        pos[y] = -1
        state[y] = 2
        if y == target:
            break
        yv = y // nu
        yu = y - yv * nu
        ty = dist[y]
        for j in range(K):
            # x = y + e_j ; seen from x, y sits at offset k = -e_j
            xu = yu + offsets[j, 0]
            xv = yv + offsets[j, 1]
            if xv < 0 or xv >= nv:
                continue
            if periodic:
                xu = xu % nu
            elif xu < 0 or xu >= nu:
                continue
            x = xv * nu + xu
            if state[x] == 2:
                continue
            k = (j + K // 2) % K
            sk = scale_half[2 * xv + offsets[k, 1]]
            ax = sk * offsets[k, 0] * hu
            ay = offsets[k, 1] * hv
            cand = ty + math.sqrt(ax * ax + ay * ay)
            if use_triangles:
                for side in (-1, 1):
                    k2 = (k + side) % K
                    zu = xu + offsets[k2, 0]
                    zv = xv + offsets[k2, 1]
                    if zv < 0 or zv >= nv:
                        continue
                    if periodic:
                        zu = zu % nu
                    elif zu < 0 or zu >= nu:
                        continue
                    z = zv * nu + zu
                    if state[z] != 2:
                        continue
                    s2 = scale_half[2 * xv + offsets[k2, 1]]
                    bx = s2 * offsets[k2, 0] * hu
                    by = offsets[k2, 1] * hv
                    val = _simplex(ty, dist[z], ax, ay, bx, by)
                    if val < cand:
                        cand = val
            if cand < dist[x]:
                dist[x] = cand
                if state[x] == 0:
                    state[x] = 1
                    heap[size] = x
                    pos[x] = size
                    size += 1
                    _sift_up(heap, pos, dist, size - 1)
                else:
                    _sift_up(heap, pos, dist, pos[x])
    return dist, state == 2
