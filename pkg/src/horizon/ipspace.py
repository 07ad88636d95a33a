"""Causal grids over a standard static product ``R x S`` and their IPs.

A cell is a pair ``(i, x)`` of a time layer and a slice node, numbered
``i * n_slice + x``. The chronological relation is

    (i, x) << (j, y)   iff   D[x, y] < (j - i) * time_step - slack

with ``D`` the exact graph distance on the slice, so ``<<`` is irreflexive
and transitive.

Finite grids need a few discrete readings of continuum notions:

* Besides the real cells there is one *ideal* cell above the top layer for
  every slice node. Its past ``{(i, y) : D[y, x] < (T - i) dt - slack}``
  stands for the past of a chain leaving the grid through the top.
* A *past set* is a union of pasts of real or ideal cells.
* A nonempty past set is an IP exactly when it is the past of a single real
  or ideal cell. A union of several incomparable pasts splits into two
  proper past subsets, and a single past cannot be split.
* The closure used by the future boundary is causal: ``x`` is adherent to
  ``A`` when ``past(x)`` lies in ``A`` together with the cells below ``A``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _bits
from .errors import InvalidParameter, NotAChain, OutOfDomain
from .geodesic import distance_fields
from .surfaces import MetricGrid

WEIGHT_SCHEMES = ("uniform", "layered")


# ---------------------------------------------------------------------------
# Cell sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellSet:
    """Immutable membership bitset over the cells of one grid."""

    mask: np.ndarray = field(repr=False)
    _weights: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool, copy=True).ravel()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def empty(cls, n_cells):
        return cls(np.zeros(n_cells, dtype=bool))

    @classmethod
    def full(cls, n_cells):
        return cls(np.ones(n_cells, dtype=bool))

    @classmethod
    def from_cells(cls, n_cells, cells):
        m = np.zeros(n_cells, dtype=bool)
        idx = np.asarray(list(cells), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n_cells):
            raise OutOfDomain("cell index outside the grid")
        m[idx] = True
        return cls(m)

    @classmethod
    def from_words(cls, words, n_cells):
        return cls(_bits.unpack(words, n_cells))

    @property
    def n_cells(self):
        return self.mask.size

    @cached_property
    def words(self):
        w = _bits.pack(self.mask)
        w.setflags(write=False)
        return w

    def cells(self):
        return np.flatnonzero(self.mask)

    def __len__(self):
        return int(np.count_nonzero(self.mask))

    def __bool__(self):
        return bool(self.mask.any())

    def __contains__(self, cell):
        return 0 <= cell < self.mask.size and bool(self.mask[cell])

    def _other(self, other):
        if not isinstance(other, CellSet) or other.mask.size != self.mask.size:
            raise InvalidParameter("cell sets belong to different grids")
        return other.mask

    def __or__(self, other):
        return CellSet(self.mask | self._other(other))

    def __and__(self, other):
        return CellSet(self.mask & self._other(other))

    def __sub__(self, other):
        return CellSet(self.mask & ~self._other(other))

    def __xor__(self, other):
        return CellSet(self.mask ^ self._other(other))

    def __invert__(self):
        return CellSet(~self.mask)

    def __le__(self, other):
        return not np.any(self.mask & ~self._other(other))

    def __lt__(self, other):
        return self <= other and len(self) < len(other)

    def __eq__(self, other):
        if not isinstance(other, CellSet):
            return NotImplemented
        return self.mask.size == other.mask.size and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.words.tobytes())

    def weight(self, w):
        """``w(A)``, cached per weight field."""
        key = id(w)
        hit = self._weights.get(key)
        if hit is None or hit[0] is not w:
            hit = (w, w.measure(self))
            self._weights[key] = hit
        return hit[1]

    def to_rle(self):
        """Run-length text: ``cells=N`` then one ``start+length`` per run."""
        m = self.mask.astype(np.int8)
        edges = np.diff(np.concatenate([[0], m, [0]]))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        runs = " ".join(f"{s}+{e - s}" for s, e in zip(starts, ends))
        return f"cells={self.mask.size}\n{runs}\n"

    @classmethod
    def from_rle(cls, text):
        lines = text.strip("\n").split("\n")
        head = lines[0].strip()
        if not head.startswith("cells="):
            raise InvalidParameter("run-length text must start with 'cells=N'")
        n = int(head[len("cells="):])
        m = np.zeros(n, dtype=bool)
        body = " ".join(lines[1:]).split()
        for tok in body:
            s, _, ln = tok.partition("+")
            s, ln = int(s), int(ln)
            if s < 0 or ln < 1 or s + ln > n:
                raise InvalidParameter(f"run {tok!r} leaves the grid")
            m[s : s + ln] = True
        return cls(m)


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CausalGrid:
    """Product lattice of ``time_count`` layers over a slice grid."""

    slice: MetricGrid
    time_count: int
    time_step: float
    slack: float
    distances: np.ndarray = field(repr=False)

    @property
    def n_slice(self):
        return self.distances.shape[0]

    @property
    def n_cells(self):
        return self.time_count * self.n_slice

    @property
    def times(self):
        return self.time_step * np.arange(self.time_count)

    def cell(self, layer, node):
        if not (0 <= layer < self.time_count and 0 <= node < self.n_slice):
            raise OutOfDomain(f"cell ({layer}, {node}) is not in the grid")
        return int(layer) * self.n_slice + int(node)

    def split(self, cell):
        """``cell -> (layer, node)``."""
        if not 0 <= cell < self.n_cells:
            raise OutOfDomain(f"cell {cell} is not in the grid")
        return divmod(int(cell), self.n_slice)

    def _reach(self, layers):
        """``D < layers * dt - slack`` for integer layer gaps (array or scalar)."""
        return self.distances < np.asarray(layers)[..., None, None] * self.time_step - self.slack

    @cached_property
    def relation(self):
        """Dense ``N x N`` table, ``relation[a, b]`` iff ``a << b``."""
        T, n = self.time_count, self.n_slice
        reach = self._reach(np.arange(T))
        R = np.zeros((T, n, T, n), dtype=bool)
        for i in range(T):
            for j in range(i + 1, T):
                R[i, :, j, :] = reach[j - i]
        R = R.reshape(T * n, T * n)
        R.setflags(write=False)
        return R

    def related(self, a, b):
        (i, x), (j, y) = self.split(a), self.split(b)
        return j > i and bool(self.distances[x, y] < (j - i) * self.time_step - self.slack)

    @cached_property
    def past_words(self):
        return _bits.pack(self.relation.T)

    @cached_property
    def future_words(self):
        return _bits.pack(self.relation)

    @cached_property
    def ideal_words(self):
        """Row ``x``: packed past of the ideal cell above node ``x``."""
        T = self.time_count
        reach = self._reach(T - np.arange(T))  # (T, n_y, n_x)
        m = np.transpose(reach, (2, 0, 1)).reshape(self.n_slice, self.n_cells)
        return _bits.pack(m)

    @cached_property
    def synoptic(self):
        """Any two bottom-layer cells have a common upper bound in the top layer."""
        top = self._reach(self.time_count - 1).astype(np.float64)
        return bool(np.all(top @ top.T > 0))

    def full(self):
        return CellSet.full(self.n_cells)

    def empty(self):
        return CellSet.empty(self.n_cells)

    def layer(self, i):
        m = np.zeros(self.n_cells, dtype=bool)
        m[i * self.n_slice : (i + 1) * self.n_slice] = True
        return CellSet(m)

    def _check(self, A):
        if not isinstance(A, CellSet) or A.n_cells != self.n_cells:
            raise InvalidParameter("cell set does not belong to this grid")
        return A


def build_causal_grid(slice, time_count, time_step, slack=None):
    """Causal grid over ``slice`` with exact graph distances on the slice.

    ``slack`` defaults to ``slice.error_bound * time_step``: the largest
    relative stencil error applied to one time step.
    """
    if not isinstance(slice, MetricGrid):
        raise InvalidParameter("slice must be a MetricGrid")
    time_count = int(time_count)
    time_step = float(time_step)
    if time_count < 2:
        raise InvalidParameter("time_count must be at least 2")
    if not time_step > 0:
        raise InvalidParameter("time_step must be positive")
    if slack is None:
        slack = slice.error_bound * time_step
    slack = float(slack)
    if not 0 <= slack < time_step:
        raise InvalidParameter("slack must lie in [0, time_step)")
    fields = distance_fields(slice, range(slice.n_nodes), method="graph")
    D = np.vstack([f.values for f in fields])
    D = 0.5 * (D + D.T)
    D.setflags(write=False)
    return CausalGrid(slice, time_count, time_step, slack, D)


# ---------------------------------------------------------------------------
# Pasts, futures, IPs
# ---------------------------------------------------------------------------


def past(grid, cell):
    return CellSet.from_words(grid.past_words[grid.cell(*grid.split(cell))], grid.n_cells)


def future(grid, cell):
    return CellSet.from_words(grid.future_words[grid.cell(*grid.split(cell))], grid.n_cells)


def ideal_past(grid, node):
    """Past of the ideal cell above slice node ``node``."""
    if not 0 <= node < grid.n_slice:
        raise OutOfDomain(f"node {node} is not in the slice")
    return CellSet.from_words(grid.ideal_words[node], grid.n_cells)


def random_past_set(grid, rng, max_generators=3):
    """Union of the pasts of 1..``max_generators`` random cells above the bottom layer."""
    k = int(rng.integers(1, max_generators + 1))
    cells = rng.integers(grid.n_slice, grid.n_cells, size=k)
    words = _bits.fold_or(grid.past_words, np.isin(np.arange(grid.n_cells), cells))
    return CellSet.from_words(words, grid.n_cells)


def chronological_past(grid, A):
    """``I-(A)``: cells below some member of ``A``."""
    grid._check(A)
    return CellSet.from_words(_bits.gather(grid.future_words, A.words, grid.n_cells), grid.n_cells)


def chronological_future(grid, A):
    """``I+(A)``: cells above some member of ``A``."""
    grid._check(A)
    return CellSet.from_words(_bits.gather(grid.past_words, A.words, grid.n_cells), grid.n_cells)


def tip_of_chain(grid, chain):
    """Union of the pasts of a chronological chain."""
    chain = [int(c) for c in chain]
    if not chain:
        raise NotAChain("empty chain")
    for a, b in zip(chain, chain[1:]):
        if not grid.related(a, b):
            raise NotAChain(f"cells {a} and {b} are not chronologically related")
    grid.split(chain[0])
    select = np.zeros(grid.n_cells, dtype=bool)
    select[chain] = True
    return CellSet.from_words(_bits.fold_or(grid.past_words, select), grid.n_cells)


def generators(grid, A):
    """Real and ideal cells whose past lies inside ``A``: ``(real, ideal)`` masks."""
    grid._check(A)
    return _bits.inside(grid.past_words, A.words), _bits.inside(grid.ideal_words, A.words)


def is_past_set(grid, A):
    """Is ``A`` a union of pasts of real or ideal cells?"""
    real, ideal = generators(grid, A)
    cover = _bits.fold_or(grid.past_words, real) | _bits.fold_or(grid.ideal_words, ideal)
    return bool(np.array_equal(cover, A.words))


def is_ip(grid, A):
    """Is ``A`` a nonempty past set that is not the union of two proper past subsets?

    Every proper past subset is a union of generator pasts strictly inside
    ``A``. If those pasts cover ``A``, a minimal cover splits into two proper
    pieces, so ``A`` decomposes; otherwise no pair of proper subsets can
    reach the uncovered cells.
    """
    grid._check(A)
    if not A or not is_past_set(grid, A):
        return False
    w = A.words
    cover = np.zeros_like(w)
    for rows, sel in zip((grid.past_words, grid.ideal_words), generators(grid, A)):
        proper = sel & ~np.all(rows == w, axis=1)
        cover |= _bits.fold_or(rows, proper)
    return not np.array_equal(cover, w)


def symmetric_difference(A, B):
    return A ^ B


def joint_future(grid, Q):
    """``I+`` of the cells lying in the future of every member of ``Q``.

    The bare intersection also holds the lattice light-cone fringe (for
    ``Q = past(p)`` it contains ``p`` itself); taking its chronological
    future recovers ``future(p)`` away from the slice edge. Empty ``Q``
    gives the full grid.
    """
    grid._check(Q)
    cells = Q.cells()
    if cells.size == 0:
        return grid.full()
    acc = np.bitwise_and.reduce(grid.future_words[cells], axis=0)
    return CellSet.from_words(_bits.gather(grid.past_words, acc, grid.n_cells), grid.n_cells)


# ---------------------------------------------------------------------------
# Future boundary and causal convexity
# ---------------------------------------------------------------------------


def _lower_upper(grid, A):
    n = grid.n_cells
    return _bits.gather(grid.future_words, A.words, n), _bits.gather(grid.past_words, A.words, n)


def future_boundary(grid, A):
    """Cells outside ``A`` whose past meets ``A`` and lies in ``A`` plus ``I-(A)``."""
    grid._check(A)
    lower, upper = _lower_upper(grid, A)
    return CellSet.from_words(_bits.boundary(grid.past_words, A.words, lower, upper), grid.n_cells)


def is_achronal(grid, C):
    grid._check(C)
    return bool(_bits.achronal(grid.future_words, C.words))


def is_causally_convex(grid, A):
    """No chain leaves ``A`` and comes back: ``I+(A) & I-(A)`` stays in ``A``."""
    grid._check(A)
    lower, upper = _lower_upper(grid, A)
    return bool(_bits.convex(A.words, lower, upper))


def union_sweep(grid, max_terms=3):
    """Compare convexity with achronality of the boundary for every union of
    at most ``max_terms`` cell pasts.

    Returns a dict with ``cases``, ``agree``, ``convex`` and ``achronal``
    counts.
    """
    if max_terms not in (1, 2, 3):
        raise InvalidParameter("max_terms must be 1, 2 or 3")
    P, F = grid.past_words, grid.future_words
    n = grid.n_cells
    lower = np.vstack([_bits.gather(F, P[i], n) for i in range(n)])
    upper = np.vstack([_bits.gather(P, P[i], n) for i in range(n)])
    c = _bits.union_sweep(P, F, lower, upper, max_terms)
    return {"cases": int(c[0]), "agree": int(c[1]), "convex": int(c[2]), "achronal": int(c[3])}


# ---------------------------------------------------------------------------
# Weights, metrics, time functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightField:
    """Strictly positive cell weights of total mass one."""

    values: np.ndarray = field(repr=False)
    scheme: str = "custom"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if v.size == 0 or not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise InvalidParameter("weights must be finite and strictly positive")
        if abs(math.fsum(v) - 1.0) > 1e-12:
            raise InvalidParameter("weights must sum to 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def total(self):
        return math.fsum(self.values)

    def measure(self, A):
        if A.n_cells != self.values.size:
            raise InvalidParameter("cell set and weight field belong to different grids")
        return math.fsum(self.values[A.mask])


def build_weights(grid, scheme="uniform"):
    """``uniform``: equal weights. ``layered``: layer ``i`` carries mass ``2^-i / Z``."""
    T, n = grid.time_count, grid.n_slice
    if scheme == "uniform":
        v = np.full(T * n, 1.0 / (T * n))
    elif scheme == "layered":
        layer = 2.0 ** -np.arange(T)
        layer /= math.fsum(layer)
        v = np.repeat(layer / n, n)
    else:
        raise InvalidParameter(f"unknown weight scheme {scheme!r}; expected one of {WEIGHT_SCHEMES}")
    v = v / math.fsum(v)
    return WeightField(v, scheme)


def _neg_log(x):
    if x == 0:
        return math.inf
    if math.isinf(x):
        return -math.inf
    return -math.log(x)


@dataclass(frozen=True)
class TimeFunctionConfig:
    """Decreasing ``h`` on ``(0, inf)`` with ``h(0+) = inf`` and ``h(inf) = -inf``."""

    h: object = _neg_log
    name: str = "-ln"

    def __post_init__(self):
        xs = np.geomspace(1e-6, 1e6, 61)
        ys = [self.h(float(x)) for x in xs]
        if not all(a > b for a, b in zip(ys, ys[1:])):
            raise InvalidParameter(f"h = {self.name} is not strictly decreasing on sampled arguments")


def _log_gap(x):
    """``-ln(1 - x)`` for a weight ``x`` in ``[0, 1]``."""
    if x >= 1.0:
        return math.inf
    return -math.log1p(-x)


def delta_metric(grid, w, A, B):
    """``-ln(1 - w(A ^ B))``; infinite when ``A`` and ``B`` split the full weight."""
    grid._check(A), grid._check(B)
    diff = A ^ B
    if diff.mask.all():
        return math.inf
    return _log_gap(diff.weight(w))


def d_metric(grid, w, A, B):
    """``delta(A, B)`` plus the same gap for the joint futures of ``A`` and ``B``."""
    base = delta_metric(grid, w, A, B)
    fa, fb = joint_future(grid, A), joint_future(grid, B)
    diff = fa ^ fb
    extra = math.inf if diff.mask.all() else _log_gap(diff.weight(w))
    return base + extra


def time_t(grid, w, cfg, A):
    """``h(d(A, M))``; ``+inf`` at ``A = M`` and ``-inf`` for weightless ``A``."""
    if not A:
        return -math.inf
    return cfg.h(d_metric(grid, w, A, grid.full()))


def time_T(grid, w, cfg, A):
    """``h(delta(A, M))``."""
    if not A:
        return -math.inf
    return cfg.h(delta_metric(grid, w, A, grid.full()))


def metrics_csv(grid, w, cfg, pairs):
    """CSV rows ``pair_id, delta, d, t_a, T_a, t_b, T_b`` for ``(A, B)`` pairs."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["pair_id", "delta", "d", "t_a", "T_a", "t_b", "T_b"])
    for k, (A, B) in enumerate(pairs):
        row = [
            delta_metric(grid, w, A, B),
            d_metric(grid, w, A, B),
            time_t(grid, w, cfg, A),
            time_T(grid, w, cfg, A),
            time_t(grid, w, cfg, B),
            time_T(grid, w, cfg, B),
        ]
        out.writerow([k] + [repr(float(x)) for x in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# TIP families and the time translation
# ---------------------------------------------------------------------------


def ip_family(grid):
    """Every IP of the grid. Each is the past of some real or ideal cell."""
    seen = {}
    for rows in (grid.past_words, grid.ideal_words):
        for r in rows:
            if r.any():
                seen.setdefault(r.tobytes(), r)
    out = [CellSet.from_words(r, grid.n_cells) for r in seen.values()]
    return [A for A in out if is_ip(grid, A)]


def largest_proper_ip(grid, w):
    """The heaviest IP other than the full grid."""
    full = grid.full()
    best, best_w = None, -1.0
    for A in ip_family(grid):
        if A == full:
            continue
        m = A.weight(w)
        if m > best_w:
            best, best_w = A, m
    return best


def boundary_ring(grid):
    """Boundary nodes of a non-periodic slice in cyclic order."""
    if grid.slice.periodic:
        raise InvalidParameter("the slice has no closed boundary ring")
    nv, nu = grid.slice.shape
    ring = [(iu, 0) for iu in range(nu)]
    ring += [(nu - 1, iv) for iv in range(1, nv)]
    ring += [(iu, nv - 1) for iu in range(nu - 2, -1, -1)]
    ring += [(0, iv) for iv in range(nv - 2, 0, -1)]
    return [grid.slice.node(iu, iv) for iu, iv in ring]


def boundary_hugging_chain(grid, start, direction=1):
    """Chain that climbs one layer per step along the slice boundary.

    From ring position ``start`` at layer 0 each step moves to the farthest
    ring node (in ``direction``) still in the future of the current cell.
    The chain ends in the top layer.
    """
    ring = boundary_ring(grid)
    L = len(ring)
    pos = int(start) % L
    chain = [grid.cell(0, ring[pos])]
    for layer in range(1, grid.time_count):
        here = grid.split(chain[-1])[1]
        step = 0
        for k in range(1, L):
            nxt = ring[(pos + direction * k) % L]
            if grid.distances[here, nxt] < grid.time_step - grid.slack:
                step = k
            else:
                break
        pos = (pos + direction * step) % L
        chain.append(grid.cell(layer, ring[pos]))
    return chain


def approach_to_full(grid, center):
    """Increasing past sets ending at the full grid.

    Set ``k`` is the union of the ideal pasts of the ``k`` slice nodes
    nearest to ``center``; repeated sets are dropped.
    """
    order = np.argsort(grid.distances[center], kind="stable")
    acc = np.zeros(grid.ideal_words.shape[1], dtype=np.uint64)
    out = []
    last = None
    for x in order:
        acc = acc | grid.ideal_words[x]
        key = acc.tobytes()
        if key != last:
            out.append(CellSet.from_words(acc.copy(), grid.n_cells))
            last = key
    return out


def shift_cells(grid, A, layers=1):
    """Translate ``A`` by ``layers`` time layers; cells leaving the grid drop out."""
    grid._check(A)
    T, n = grid.time_count, grid.n_slice
    m = A.mask.reshape(T, n)
    out = np.zeros_like(m)
    k = int(layers)
    if abs(k) < T:
        if k >= 0:
            out[k:] = m[: T - k]
        else:
            out[: T + k] = m[-k:]
    return CellSet(out.ravel())


def shift_chain(grid, chain, layers=1):
    out = []
    for c in chain:
        i, x = grid.split(c)
        out.append(grid.cell(i + layers, x))
    return out


def tip_profile(grid, chain):
    """``b(y) = max_k (t_k - D[y, x_k])`` over the chain cells ``(t_k, x_k)``.

    Cell ``(i, y)`` lies in the chain's TIP exactly when some term satisfies
    ``t_i < t_k - D[y, x_k] - slack``. Shifting the chain by one layer adds
    ``time_step`` to the profile.
    """
    vals = np.full(grid.n_slice, -np.inf)
    for c in chain:
        i, x = grid.split(c)
        vals = np.maximum(vals, i * grid.time_step - grid.distances[:, x])
    return vals
