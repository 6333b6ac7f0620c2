"""Bottleneck assignment on a square cost matrix."""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

__all__ = ["matching_bottleneck"]


def matching_bottleneck(cross, return_matching: bool = False):
    """``min over bijections pi of max_i cross[i, pi(i)]`` for a square cost matrix.

    Binary search over the sorted distinct entries, each step testing for a
    perfect matching in the threshold graph.
    """
    cross = np.asarray(cross, dtype=float)
    if cross.ndim != 2 or cross.shape[0] != cross.shape[1]:
        raise ValueError(f"need an m x m cross-distance matrix, got shape {cross.shape}")
    if np.isnan(cross).any():
        raise ValueError("cost matrix contains NaN")
    m = cross.shape[0]
    if m == 0:
        return (0.0, np.zeros(0, dtype=int)) if return_matching else 0.0
    vals = np.unique(cross)

    def perfect(t):
        g = csr_matrix(cross <= t)
        match = maximum_bipartite_matching(g, perm_type="column")
        return match if np.all(match >= 0) else None

    # every row and column needs an edge, so the answer is at least the
    # largest row/column minimum; the largest entry is always feasible
    floor = max(cross.min(axis=1).max(), cross.min(axis=0).max())
    lo, hi = int(np.searchsorted(vals, floor)), vals.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if perfect(vals[mid]) is not None:
            hi = mid
        else:
            lo = mid + 1
    if return_matching:
        return float(vals[lo]), perfect(vals[lo])
    return float(vals[lo])
