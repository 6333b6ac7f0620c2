"""Sublevel-set persistent homology of lower-star filtrations over Z/2.

Diagrams follow the l-infinity convention: the distance from a point
``(b, d)`` to the diagonal is ``per = (d - b) / 2`` and two points are
compared by ``max(|b - b'|, |d - d'|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path

import numpy as np

from ._matching import matching_bottleneck
from .mmspace import MetricMeasureSpace

__all__ = [
    "SimplicialComplex",
    "Filtration",
    "GradedDiagram",
    "StepFunction",
    "MAX_SIMPLICES",
    "build_rips",
    "lower_star",
    "compute_persistence",
    "bottleneck_distance",
    "betti_curve",
    "euler_curve",
    "lp_distance",
    "total_persistence",
    "write_diagram_csv",
    "write_step_csv",
]

MAX_SIMPLICES = 10_000_000


class SimplicialComplex:
    """Finite abstract simplicial complex on vertices ``0..n-1``.

    ``simplices`` must be closed under taking faces; each is stored as a
    sorted tuple.  Order of the input list is kept.
    """

    def __init__(self, n: int, simplices, check: bool = True):
        self.n = int(n)
        self.simplices = [tuple(sorted(int(v) for v in s)) for s in simplices]
        if check:
            self._validate()

    def _validate(self):
        seen = set()
        for s in self.simplices:
            if not s:
                raise ValueError("empty simplex")
            if len(set(s)) != len(s):
                raise ValueError(f"repeated vertex in simplex {s}")
            if s[0] < 0 or s[-1] >= self.n:
                raise ValueError(f"simplex {s} has a vertex outside 0..{self.n - 1}")
            if s in seen:
                raise ValueError(f"duplicate simplex {s}")
            seen.add(s)
        for s in self.simplices:
            if len(s) > 1:
                for f in combinations(s, len(s) - 1):
                    if f not in seen:
                        raise ValueError(f"face {f} of {s} is missing")

    @classmethod
    def from_maximal(cls, n: int, maximal) -> "SimplicialComplex":
        """Downward closure of a list of simplices."""
        out = {}
        for s in maximal:
            s = tuple(sorted(s))
            for d in range(1, len(s) + 1):
                for f in combinations(s, d):
                    out.setdefault(f, None)
        for v in range(n):
            out.setdefault((v,), None)
        return cls(n, sorted(out, key=lambda s: (len(s), s)), check=True)

    def __len__(self) -> int:
        return len(self.simplices)

    def __repr__(self) -> str:
        return f"SimplicialComplex(n={self.n}, simplices={len(self)}, dim={self.dim})"

    @cached_property
    def dims(self) -> np.ndarray:
        return np.fromiter((len(s) - 1 for s in self.simplices), dtype=np.int64, count=len(self))

    @property
    def dim(self) -> int:
        return int(self.dims.max()) if len(self) else -1

    @cached_property
    def lex_rank(self) -> np.ndarray:
        order = sorted(range(len(self)), key=self.simplices.__getitem__)
        rank = np.empty(len(self), dtype=np.int64)
        rank[order] = np.arange(len(self))
        return rank

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.simplices)}

    @cached_property
    def vertex_array(self) -> np.ndarray:
        """Simplices as rows padded with ``n`` (an index past the last vertex)."""
        out = np.full((len(self), max(self.dim, 0) + 1), self.n, dtype=np.int64)
        for i, s in enumerate(self.simplices):
            out[i, :len(s)] = s
        return out

    def f_vector(self) -> list[int]:
        return np.bincount(self.dims, minlength=self.dim + 1).tolist()

    def vertex_sets(self) -> frozenset:
        return frozenset(self.simplices)


def _dist_of(space) -> np.ndarray:
    if isinstance(space, MetricMeasureSpace):
        return np.asarray(space.dist)
    d = np.asarray(space, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"expected a square distance matrix, got shape {d.shape}")
    return d


def build_rips(space, scale: float, maxdim: int = 2, limit: int = MAX_SIMPLICES) -> SimplicialComplex:
    """Vietoris-Rips complex: every vertex set of size ``<= maxdim + 1`` with all pairwise distances ``<= scale``.

    ``space`` is a :class:`MetricMeasureSpace` or a square distance matrix.
    Raises ``OverflowError`` once the count passes ``limit``.
    """
    if not scale >= 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    if not (0 <= maxdim <= 3):
        raise ValueError(f"maxdim must be in 0..3, got {maxdim}")
    d = _dist_of(space)
    n = d.shape[0]
    adj = d <= scale
    np.fill_diagonal(adj, False)
    # neighbours above each vertex as Python int bitsets
    upper = []
    for i in range(n):
        bits = 0
        for j in np.flatnonzero(adj[i, i + 1:]) + i + 1:
            bits |= 1 << int(j)
        upper.append(bits)

    simplices = [(i,) for i in range(n)]
    layer = [((i,), upper[i]) for i in range(n)]
    for _ in range(maxdim):
        nxt = []
        for s, common in layer:
            c = common
            while c:
                low = c & -c
                j = low.bit_length() - 1
                c ^= low
                nxt.append((s + (j,), common & upper[j]))
        if len(simplices) + len(nxt) > limit:
            raise OverflowError(
                f"Rips complex exceeds {limit} simplices (at least {len(simplices) + len(nxt)}); "
                "lower the scale or maxdim"
            )
        if not nxt:
            break
        simplices.extend(s for s, _ in nxt)
        layer = nxt
    return SimplicialComplex(n, simplices, check=False)


@dataclass(frozen=True)
class Filtration:
    """A complex with simplex values and a total order compatible with faces."""

    complex: SimplicialComplex
    values: np.ndarray  # per simplex, in complex order
    order: np.ndarray  # simplex indices in filtration order

    def __len__(self) -> int:
        return len(self.complex)

    def is_monotone(self) -> bool:
        pos = np.empty(len(self), dtype=np.int64)
        pos[self.order] = np.arange(len(self))
        idx = self.complex.index
        for s, p in zip(self.complex.simplices, pos):
            if len(s) > 1:
                for f in combinations(s, len(s) - 1):
                    j = idx[f]
                    if pos[j] > p or self.values[j] > self.values[idx[s]]:
                        return False
        return True


def lower_star(cx: SimplicialComplex, f, order: np.ndarray | None = None) -> Filtration:
    """Lower-star filtration: each simplex takes the max of ``f`` over its vertices.

    Simplices are ordered by value, then dimension, then lexicographically.
    An explicit ``order`` may be supplied instead (it is not checked here;
    see :meth:`Filtration.is_monotone`).
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (cx.n,):
        raise ValueError(f"need {cx.n} vertex values, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("vertex values must be finite")
    vals = np.append(f, -np.inf)[cx.vertex_array].max(axis=1)
    if order is None:
        order = np.lexsort((cx.lex_rank, cx.dims, vals))
    return Filtration(cx, vals, np.asarray(order, dtype=np.int64))


@dataclass(frozen=True)
class GradedDiagram:
    """Persistence pairs ``(dim, birth, death)``; ``death`` may be ``inf``."""

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    maxdim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", np.asarray(self.dims, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "births", np.asarray(self.births, dtype=float).reshape(-1))
        object.__setattr__(self, "deaths", np.asarray(self.deaths, dtype=float).reshape(-1))
        if not (self.dims.size == self.births.size == self.deaths.size):
            raise ValueError("dims, births and deaths must have equal length")
        if np.any(self.deaths < self.births):
            raise ValueError("death before birth")

    @classmethod
    def from_pairs(cls, pairs, maxdim: int | None = None) -> "GradedDiagram":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0), maxdim or 0)
        d, b, e = zip(*pairs)
        return cls(np.array(d), np.array(b), np.array(e), max(d) if maxdim is None else maxdim)

    def __len__(self) -> int:
        return int(self.dims.size)

    def __eq__(self, other):
        if not isinstance(other, GradedDiagram):
            return NotImplemented
        return self.pairs() == other.pairs()


    def in_dim(self, dim: int) -> np.ndarray:
        """``(m, 2)`` array of ``(birth, death)`` in one degree, sorted."""
        sel = self.dims == dim
        pts = np.column_stack([self.births[sel], self.deaths[sel]])
        return pts[np.lexsort((pts[:, 1], pts[:, 0]))] if len(pts) else pts.reshape(0, 2)

    @property
    def degrees(self) -> list[int]:
        return sorted(set(self.dims.tolist()))

    @property
    def per(self) -> np.ndarray:
        return (self.deaths - self.births) / 2

    def pairs(self) -> list[tuple]:
        """Canonically sorted ``(dim, birth, death)`` triples."""
        return sorted(zip(self.dims.tolist(), self.births.tolist(), self.deaths.tolist()))

    def max_finite_value(self) -> float:
        fin = self.deaths[np.isfinite(self.deaths)]
        vals = np.concatenate([self.births, fin])
        return float(vals.max()) if vals.size else -math.inf

    def to_json(self) -> list:
        return [[d, b, "inf" if math.isinf(e) else e] for d, b, e in self.pairs()]


def _reduce(kdims, boundary, maxdim: int, m: int) -> dict:
    """Return ``{low_row: column}`` for every nonzero reduced column."""
    pivot_col = {}
    reduced = {}
    cleared = np.zeros(m, dtype=bool)
    # higher degrees first so their pivots clear creator columns below
    for d in range(maxdim + 1, 0, -1):
        for j in np.flatnonzero(kdims == d):
            j = int(j)
            if cleared[j]:
                continue
            col = boundary(j)
            while col:
                other = pivot_col.get(max(col))
                if other is None:
                    break
                col ^= reduced[other]
            if col:
                low = max(col)
                pivot_col[low] = j
                reduced[j] = col
                cleared[low] = True
    return pivot_col


def compute_persistence(filt: Filtration, maxdim: int | None = None) -> GradedDiagram:
    """Standard column reduction over Z/2 with clearing.

    Homology is reported in degrees ``0..maxdim`` (default: the complex
    dimension); simplices above ``maxdim + 1`` are ignored.  Zero-length bars
    are dropped; unpaired classes give infinite bars.
    """
    cx = filt.complex
    if maxdim is None:
        maxdim = max(cx.dim, 0)
    dims = cx.dims
    keep = filt.order[dims[filt.order] <= maxdim + 1]
    m = keep.size
    pos = np.full(len(cx), -1, dtype=np.int64)
    pos[keep] = np.arange(m)
    idx = cx.index
    simp = cx.simplices
    kdims = dims[keep]
    kvals = filt.values[keep]

    def boundary(p):
        s = simp[keep[p]]
        if len(s) == 1:
            return set()
        return {int(pos[idx[f]]) for f in combinations(s, len(s) - 1)}

    pivots = _reduce(kdims, boundary, maxdim, m)
    paired = np.zeros(m, dtype=bool)
    out = []
    for low, j in pivots.items():
        paired[low] = paired[j] = True
        b, e = kvals[low], kvals[j]
        if e > b:
            out.append((int(kdims[low]), float(b), float(e)))
    for p in np.flatnonzero(~paired & (kdims <= maxdim)):
        out.append((int(kdims[p]), float(kvals[p]), math.inf))
    out.sort()
    return GradedDiagram.from_pairs(out, maxdim=maxdim)


# --------------------------------------------------------------------------
# bottleneck distance


def _finite_bottleneck(P: np.ndarray, Q: np.ndarray) -> float:
    m, l = len(P), len(Q)
    if m + l == 0:
        return 0.0
    perP = (P[:, 1] - P[:, 0]) / 2
    perQ = (Q[:, 1] - Q[:, 0]) / 2
    C = np.full((m + l, m + l), np.inf)
    if m and l:
        C[:m, :l] = np.maximum(np.abs(P[:, None, 0] - Q[None, :, 0]), np.abs(P[:, None, 1] - Q[None, :, 1]))
    # row i of P may go to its own diagonal slot; likewise for columns of Q
    C[np.arange(m), l + np.arange(m)] = perP
    C[m + np.arange(l), np.arange(l)] = perQ
    C[m:, l:] = 0.0
    return matching_bottleneck(C)


def _bottleneck_one(A: np.ndarray, B: np.ndarray) -> float:
    ia, ib = np.isinf(A[:, 1]), np.isinf(B[:, 1])
    if ia.sum() != ib.sum():
        return math.inf
    ess = 0.0
    if ia.any():
        ess = float(np.abs(np.sort(A[ia, 0]) - np.sort(B[ib, 0])).max())
    return max(ess, _finite_bottleneck(A[~ia], B[~ib]))


def bottleneck_distance(D1: GradedDiagram, D2: GradedDiagram, dim: int | None = None) -> float:
    """Bottleneck distance in one degree, or the max over all degrees when ``dim`` is None.

    Infinite bars match only infinite bars (by sorted birth); differing counts give ``inf``.
    """
    if dim is not None:
        return _bottleneck_one(D1.in_dim(dim), D2.in_dim(dim))
    degs = sorted(set(D1.degrees) | set(D2.degrees))
    return max((_bottleneck_one(D1.in_dim(d), D2.in_dim(d)) for d in degs), default=0.0)


# --------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function, ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``, zero elsewhere."""

    breakpoints: np.ndarray
    values: np.ndarray
    horizon: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if bp.size == 0 and v.size == 0:
            pass
        elif v.size != bp.size - 1:
            raise ValueError("need len(values) == len(breakpoints) - 1")
        elif np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.values.size == 0:
            return np.zeros_like(t)
        i = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = (i >= 0) & (i < self.values.size)
        return np.where(inside, self.values[np.clip(i, 0, self.values.size - 1)], 0.0)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
            and self.horizon == other.horizon
        )

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.values.tobytes(), self.horizon))


def _from_events(times, weights, horizon) -> StepFunction:
    if len(times) == 0:
        return StepFunction(np.zeros(0), np.zeros(0), horizon)
    times = np.asarray(times, dtype=float)
    weights = np.asarray(weights, dtype=float)
    bp, inv = np.unique(times, return_inverse=True)
    jump = np.bincount(inv, weights=weights, minlength=bp.size)
    vals = np.cumsum(jump)[:-1]
    # merge equal neighbours, then strip zero ends
    keep = np.ones(bp.size, dtype=bool)
    keep[1:-1] = vals[1:] != vals[:-1]
    bp, vals = bp[keep], vals[keep[:-1]]
    nz = np.flatnonzero(vals != 0)
    if nz.size == 0:
        return StepFunction(np.zeros(0), np.zeros(0), horizon)
    lo, hi = nz[0], nz[-1]
    return StepFunction(bp[lo:hi + 2], vals[lo:hi + 1], horizon)


def _check_horizon(diag: GradedDiagram, horizon):
    has_inf = bool(np.isinf(diag.deaths).any())
    if horizon is None:
        if has_inf:
            raise ValueError("diagram has infinite bars; pass a horizon")
        return None
    top = diag.max_finite_value()
    if horizon < top:
        raise ValueError(f"horizon {horizon} is below the largest finite diagram value {top}")
    return float(horizon)


def betti_curve(diag: GradedDiagram, dim: int, horizon: float | None = None) -> StepFunction:
    """Number of bars in degree ``dim`` alive at each ``t`` (infinite bars cut at ``horizon``)."""
    horizon = _check_horizon(diag, horizon)
    sel = diag.dims == dim
    b = diag.births[sel]
    e = np.minimum(diag.deaths[sel], horizon) if horizon is not None else diag.deaths[sel]
    live = e > b
    b, e = b[live], e[live]
    return _from_events(np.concatenate([b, e]), np.concatenate([np.ones(b.size), -np.ones(e.size)]), horizon)


def euler_curve(diag: GradedDiagram, horizon: float | None = None) -> StepFunction:
    """Alternating sum over degrees of the Betti curves."""
    horizon = _check_horizon(diag, horizon)
    b = diag.births
    e = np.minimum(diag.deaths, horizon) if horizon is not None else diag.deaths
    live = e > b
    sign = np.where(diag.dims % 2 == 0, 1.0, -1.0)[live]
    b, e = b[live], e[live]
    return _from_events(np.concatenate([b, e]), np.concatenate([sign, -sign]), horizon)


def lp_distance(s1: StepFunction, s2: StepFunction, p: float = 1.0) -> float:
    """``(integral |s1 - s2|^p)^(1/p)``, exact over the merged breakpoints."""
    if not p > 0:
        raise ValueError(f"p must be > 0, got {p}")
    bp = np.union1d(s1.breakpoints, s2.breakpoints)
    if bp.size < 2:
        return 0.0
    left = bp[:-1]
    diff = np.abs(s1(left) - s2(left))
    total = float(np.sum(diff**p * np.diff(bp)))
    return total ** (1.0 / p)


def total_persistence(diag: GradedDiagram, q: float = 1.0, t: float = 0.0) -> float:
    """Sum of ``per^q`` over finite bars with ``per > t``, all degrees."""
    if not q > 0:
        raise ValueError(f"q must be > 0, got {q}")
    if not t >= 0:
        raise ValueError(f"t must be >= 0, got {t}")
    per = diag.per[np.isfinite(diag.deaths)]
    return float(np.sum(per[per > t] ** q))


# --------------------------------------------------------------------------
# export


def write_diagram_csv(diag: GradedDiagram, path) -> None:
    lines = ["dim,birth,death"]
    for d, b, e in diag.pairs():
        lines.append(f"{d},{b!r},{'inf' if math.isinf(e) else repr(e)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_step_csv(step: StepFunction, path) -> None:
    lines = ["breakpoint,value"]
    vals = list(step.values) + [0.0]
    for x, v in zip(step.breakpoints, vals):
        lines.append(f"{float(x)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
