"""Packed-bitset kernels for cell sets on causal grids.

A set of ``N`` cells is a little-endian array of ``ceil(N / 64)`` uint64
words; cell ``c`` is bit ``c & 63`` of word ``c >> 6``. Relation tables are
2-D arrays whose row ``x`` is the packed past (or future) of cell ``x``.
"""

import numpy as np
from numba import njit


def pack(mask):
    """Bool vector(s) -> uint64 words along the last axis."""
    mask = np.asarray(mask, dtype=bool)
    n = mask.shape[-1]
    words = (n + 63) // 64
    padded = np.zeros(mask.shape[:-1] + (words * 64,), dtype=bool)
    padded[..., :n] = mask
    return np.ascontiguousarray(np.packbits(padded, axis=-1, bitorder="little")).view("<u8")


def unpack(words, n):
    bytes_ = np.ascontiguousarray(words).view(np.uint8)
    return np.unpackbits(bytes_, axis=-1, bitorder="little")[..., :n].astype(bool)


@njit(cache=True, nogil=True)
def hits(rows, s):
    """Bool per row: does the row meet ``s``?"""
    out = np.zeros(rows.shape[0], dtype=np.bool_)
    for r in range(rows.shape[0]):
        for k in range(rows.shape[1]):
            if rows[r, k] & s[k]:
                out[r] = True
                break
    return out


@njit(cache=True, nogil=True)
def inside(rows, s):
    """Bool per row: is the row a subset of ``s``?"""
    out = np.ones(rows.shape[0], dtype=np.bool_)
    for r in range(rows.shape[0]):
        for k in range(rows.shape[1]):
            if rows[r, k] & ~s[k]:
                out[r] = False
                break
    return out


@njit(cache=True, nogil=True)
def gather(rows, s, n):
    """Packed set of the cells ``x < n`` whose row meets ``s``."""
    W = s.shape[0]
    out = np.zeros(W, dtype=np.uint64)
    for x in range(n):
        for k in range(W):
            if rows[x, k] & s[k]:
                out[x >> 6] |= np.uint64(1) << np.uint64(x & 63)
                break
    return out


@njit(cache=True, nogil=True)
def fold_or(rows, select):
    out = np.zeros(rows.shape[1], dtype=np.uint64)
    for r in range(rows.shape[0]):
        if select[r]:
            for k in range(rows.shape[1]):
                out[k] |= rows[r, k]
    return out


@njit(cache=True, nogil=True)
def _has(s, x):
    return (s[x >> 6] >> np.uint64(x & 63)) & np.uint64(1)


@njit(cache=True, nogil=True)
def boundary(past, a, lower, upper):
    """Future boundary of ``a`` given ``lower = I-(a)`` and ``upper = I+(a)``.

    A cell ``x`` not in ``a`` belongs to it when its past meets ``a`` (that
    is, ``x`` lies in ``upper``) and its past lies inside ``a`` together
    with the cells below ``a``.
    """
    W = a.shape[0]
    out = np.zeros(W, dtype=np.uint64)
    for k in range(W):
        cand = upper[k] & ~a[k]
        while cand:
            low = cand & (~cand + np.uint64(1))
            b = 0
            t = low
            while t > np.uint64(1):
                t >>= np.uint64(1)
                b += 1
            cand ^= low
            x = k * 64 + b
            ok = True
            for m in range(W):
                if past[x, m] & ~(a[m] | lower[m]):
                    ok = False
                    break
            if ok:
                out[k] |= low
    return out


@njit(cache=True, nogil=True)
def achronal(future, c):
    W = c.shape[0]
    for k in range(W):
        cand = c[k]
        b = 0
        while cand:
            if cand & np.uint64(1):
                x = k * 64 + b
                for m in range(W):
                    if future[x, m] & c[m]:
                        return False
            cand >>= np.uint64(1)
            b += 1
    return True


@njit(cache=True, nogil=True)
def convex(a, lower, upper):
    """No cell outside ``a`` sits above one member and below another."""
    for k in range(a.shape[0]):
        if lower[k] & upper[k] & ~a[k]:
            return False
    return True


@njit(cache=True, nogil=True)
def union_sweep(past, future, lower_of_past, upper_of_past, max_terms):
    """Check convexity against achronality of the boundary for every union
    of at most ``max_terms`` (1..3) cell pasts.

    ``lower_of_past[i]`` and ``upper_of_past[i]`` are ``I-`` and ``I+`` of
    ``past(i)``; both operators distribute over unions. Returns
    ``(cases, agree, convex_count, achronal_count)``.
    """
    n, W = past.shape
    counts = np.zeros(4, dtype=np.int64)
    a = np.empty(W, dtype=np.uint64)
    lo = np.empty(W, dtype=np.uint64)
    up = np.empty(W, dtype=np.uint64)
    for i in range(n):
        for j in range(i, n):
            if max_terms < 2 and j > i:
                break
            for l in range(j, n):
                if max_terms < 3 and l > j:
                    break
                # distinct index tuples only: (i,i,i), (i,j,j), (i,j,l)
                if j == i and l != i:
                    continue
                for k in range(W):
                    a[k] = past[i, k] | past[j, k] | past[l, k]
                    lo[k] = lower_of_past[i, k] | lower_of_past[j, k] | lower_of_past[l, k]
                    up[k] = upper_of_past[i, k] | upper_of_past[j, k] | upper_of_past[l, k]
                cv = convex(a, lo, up)
                ac = achronal(future, boundary(past, a, lo, up))
                counts[0] += 1
                counts[1] += cv == ac
                counts[2] += cv
                counts[3] += ac
    return counts
