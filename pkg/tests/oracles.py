"""Independent reference computations used by the tests.

None of these share code with the package beyond its public data types:
brute-force matchings, persistent Betti numbers from GF(2) ranks, and a
random corpus of metric measure spaces.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial.distance import cdist

from dke.mmspace import make_mms


def random_mms(rng, n=None, dim=None, measure="random", nmax=60):
    """Metric from a random Euclidean point cloud, with random positive atom masses."""
    n = int(rng.integers(2, nmax + 1)) if n is None else n
    dim = int(rng.integers(1, 5)) if dim is None else dim
    pts = rng.standard_normal((n, dim)) * rng.uniform(0.5, 3.0)
    if measure == "random":
        mu = rng.uniform(0.2, 2.0, n)
    elif measure == "uniform":
        mu = np.full(n, 1.0 / n)
    else:
        mu = np.asarray(measure, dtype=float)
    return make_mms(cdist(pts, pts), mu)


def corpus(seed=2024, count=200, nmax=60):
    rng = np.random.default_rng(seed)
    return [random_mms(rng, nmax=nmax) for _ in range(count)]


# --------------------------------------------------------------------------
# matchings

_PERMS = {}


def perms(m):
    if m not in _PERMS:
        _PERMS[m] = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    return _PERMS[m]


def brute_bottleneck(cross):
    """min over all m! bijections of the largest matched cost."""
    cross = np.asarray(cross)
    m = cross.shape[0]
    P = perms(m)
    return float(cross[np.arange(m)[None, :], P].max(axis=1).min())


def brute_diagram_bottleneck(A, B):
    """Exhaustive partial matchings between two finite diagrams (l-inf costs, per to diagonal)."""
    A = [tuple(p) for p in A]
    B = [tuple(p) for p in B]
    per = lambda p: (p[1] - p[0]) / 2
    cost = lambda p, q: max(abs(p[0] - q[0]), abs(p[1] - q[1]))
    best = math.inf

    def rec(i, used, cur):
        nonlocal best
        if cur >= best:
            return
        if i == len(A):
            rest = max((per(B[j]) for j in range(len(B)) if j not in used), default=0.0)
            best = min(best, max(cur, rest))
            return
        rec(i + 1, used, max(cur, per(A[i])))
        for j in range(len(B)):
            if j not in used:
                rec(i + 1, used | {j}, max(cur, cost(A[i], B[j])))

    rec(0, frozenset(), 0.0)
    return best


# --------------------------------------------------------------------------
# persistence from ranks


def gf2_rank(M):
    """Rank over GF(2): insert each column, packed into an int, into an XOR basis keyed by top bit."""
    M = np.asarray(M, dtype=np.uint8) % 2
    if M.size == 0:
        return 0
    weights = 1 << np.arange(M.shape[0], dtype=object)
    basis = {}
    for col in M.T:
        x = int(np.dot(col.astype(object), weights))
        while x:
            top = x.bit_length() - 1
            if top not in basis:
                basis[top] = x
                break
            x ^= basis[top]
    return len(basis)


def boundary_matrix(simplices_d, simplices_dm1):
    idx = {s: i for i, s in enumerate(simplices_dm1)}
    M = np.zeros((len(simplices_dm1), len(simplices_d)), dtype=np.uint8)
    for j, s in enumerate(simplices_d):
        for f in itertools.combinations(s, len(s) - 1):
            M[idx[f], j] = 1
    return M


def rank_diagram(simplices, f, maxdim):
    """Bars of the lower-star filtration via persistent Betti numbers.

    ``beta^{a,b}_d = dim Z_d(K_a) - dim(B_d(K_b) cap C_d(K_a))``, then
    inclusion-exclusion over the grid of distinct values.
    """
    f = np.asarray(f, dtype=float)
    val = {s: max(f[v] for v in s) for s in simplices}
    by_dim = {}
    for s in simplices:
        by_dim.setdefault(len(s) - 1, []).append(s)
    levels = sorted(set(val.values()))
    m = len(levels)
    out = []
    for d in range(maxdim + 1):
        Sd = by_dim.get(d, [])
        if not Sd:
            continue
        vd = np.array([val[s] for s in Sd])
        Bd = boundary_matrix(Sd, by_dim.get(d - 1, [])) if d > 0 else np.zeros((0, len(Sd)), np.uint8)
        Su = by_dim.get(d + 1, [])
        vu = np.array([val[s] for s in Su]) if Su else np.zeros(0)
        Bu = boundary_matrix(Su, Sd) if Su else np.zeros((len(Sd), 0), np.uint8)

        def beta(a, b):
            if a < 0:
                return 0
            ina = vd <= levels[a]
            z = int(ina.sum()) - gf2_rank(Bd[:, ina])
            M = Bu[:, vu <= levels[b]]
            cap = gf2_rank(M) - gf2_rank(M[~ina, :])
            return z - cap

        B = {}

        def bb(a, b):
            if (a, b) not in B:
                B[(a, b)] = beta(a, b)
            return B[(a, b)]

        for i in range(m):
            for j in range(i + 1, m):
                mult = bb(i, j - 1) - bb(i, j) - bb(i - 1, j - 1) + bb(i - 1, j)
                out += [(d, levels[i], levels[j])] * mult
            mult = bb(i, m - 1) - bb(i - 1, m - 1)
            out += [(d, levels[i], math.inf)] * mult
    return sorted(out)


def random_complex(rng, nv=None, maxdim=3):
    """Random complex given by maximal simplices, closed downward.

    Often includes a hollow tetrahedron so that degree-2 classes occur.
    """
    nv = int(rng.integers(1, 8)) if nv is None else nv
    maximal = []
    count = int(rng.integers(1, 2 * nv + 2))
    for _ in range(count):
        size = int(rng.integers(1, min(maxdim, 2, nv - 1) + 2))
        maximal.append(tuple(sorted(rng.choice(nv, size=size, replace=False).tolist())))
    if nv >= 4 and rng.uniform() < 0.5:
        quad = sorted(rng.choice(nv, size=4, replace=False).tolist())
        maximal += list(itertools.combinations(quad, 3))
        if maxdim >= 3 and rng.uniform() < 0.3:
            maximal.append(tuple(quad))
    return nv, maximal
