"""Persistence and Euler kernel transforms of an embedded space.

A direction ``(u, v)`` on the unit sphere of ``R^k x R^k`` gives the height
``f(x) = <Re Phi_k(x), u> + <Im Phi_k(x), v>`` on the points.  The intrinsic
transforms filter a complex built on the original space by ``f``; the
embedded ones filter a Rips complex built on the image ``Phi_k(X)`` in
``R^{2k}``.  Both use the same height values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .embedding import Embedding
from .persistence import (
    GradedDiagram,
    SimplicialComplex,
    StepFunction,
    bottleneck_distance,
    build_rips,
    compute_persistence,
    euler_curve,
    lower_star,
    lp_distance,
)

__all__ = [
    "Direction",
    "TransformResult",
    "DEFAULT_DIRECTIONS",
    "height_function",
    "direction_grid",
    "embedded_complex",
    "complexes_match",
    "ipkt",
    "epkt",
    "iekt",
    "eekt",
    "transform_distance",
    "per_direction_distances",
    "lipschitz_constant",
    "injectivity_report",
    "result_to_json",
    "write_json",
    "write_distance_csv",
]

DEFAULT_DIRECTIONS = 64
UNIT_TOL = 1e-12
DUP_TOL = 1e-9


@dataclass(frozen=True)
class Direction:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if u.shape != v.shape:
            raise ValueError(f"u and v must have equal length, got {u.size} and {v.size}")
        norm = math.sqrt(float(u @ u + v @ v))
        if abs(norm - 1.0) > UNIT_TOL:
            raise ValueError(f"direction must have unit norm, got {norm!r}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_vector(cls, w, normalize: bool = False) -> "Direction":
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.size % 2:
            raise ValueError("direction vector must have even length 2k")
        if normalize:
            w = w / np.linalg.norm(w)
        k = w.size // 2
        return cls(w[:k], w[k:])

    @property
    def k(self) -> int:
        return int(self.u.size)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def __neg__(self) -> "Direction":
        return Direction(-self.u, -self.v)

    def __eq__(self, other):
        if not isinstance(other, Direction):
            return NotImplemented
        return np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v)

    def __hash__(self):
        return hash(self.vector.tobytes())


@dataclass(frozen=True)
class TransformResult:
    """One diagram or curve per direction, in the order requested."""

    kind: str
    k: int
    directions: tuple
    values: tuple
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.directions)

    def __iter__(self):
        return iter(zip(self.directions, self.values))


def _coords(emb) -> np.ndarray:
    return emb.coords if isinstance(emb, Embedding) else np.asarray(emb)


def height_function(emb, direction: Direction) -> np.ndarray:
    """``Re(coords) @ u + Im(coords) @ v``."""
    z = _coords(emb)
    if z.ndim != 2 or z.shape[1] != direction.k:
        raise ValueError(f"direction has k={direction.k} but embedding has k={z.shape[-1]}")
    return z.real @ direction.u + z.imag @ direction.v


def direction_grid(k: int, count: int = DEFAULT_DIRECTIONS, seed: int = 0) -> list[Direction]:
    """``count`` seeded Gaussian directions normalised onto the unit sphere in ``R^{2k}``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        w = rng.standard_normal(2 * k)
        nrm = np.linalg.norm(w)
        if nrm > 0:
            out.append(Direction.from_vector(w / nrm))
    return out


def _same_k(emb, dirs):
    k = _coords(emb).shape[1]
    for d in dirs:
        if d.k != k:
            raise ValueError(f"direction has k={d.k} but embedding has k={k}")
    return k


def ipkt(emb, complex_on_X: SimplicialComplex, dirs, maxdim: int | None = None) -> TransformResult:
    """Intrinsic persistence transform on a complex whose vertices are the points of ``X``.

    Homology is computed in degrees ``0..maxdim`` (default: the complex dimension).
    """
    k = _same_k(emb, dirs)
    if complex_on_X.n != _coords(emb).shape[0]:
        raise ValueError(f"complex has {complex_on_X.n} vertices but the embedding has {_coords(emb).shape[0]} points")
    if maxdim is None:
        maxdim = max(complex_on_X.dim, 0)
    diags = tuple(compute_persistence(lower_star(complex_on_X, height_function(emb, d)), maxdim) for d in dirs)
    params = {"maxdim": maxdim, "simplices": complex_on_X.f_vector()}
    return TransformResult("i-PKT", k, tuple(dirs), diags, params)


def embedded_complex(emb, rips_scale: float, rips_dim: int = 2, dup_tol: float = DUP_TOL):
    """Rips complex on the image of the embedding.

    Points whose images lie within ``dup_tol`` (relative to the largest
    coordinate) are merged first.  Returns the complex and, for each of its
    vertices, the index of the representative point of ``X`` (the smallest
    index in its group).
    """
    z = _coords(emb)
    P = np.hstack([z.real, z.imag])
    scale = max(1.0, float(np.abs(P).max()) if P.size else 1.0)
    D = cdist(P, P)
    close = csr_matrix(D <= dup_tol * scale)
    _, label = connected_components(close, directed=False)
    _, first = np.unique(label, return_index=True)
    reps = np.sort(first).astype(np.int64)
    cx = build_rips(D[np.ix_(reps, reps)], rips_scale, rips_dim)
    return cx, reps


def complexes_match(complex_on_X: SimplicialComplex, emb, rips_scale: float, rips_dim: int | None = None) -> bool:
    """True when the embedded Rips complex is the intrinsic one under the identity on vertices."""
    if rips_dim is None:
        rips_dim = max(complex_on_X.dim, 0)
    cx, reps = embedded_complex(emb, rips_scale, rips_dim)
    if reps.size != complex_on_X.n:
        return False
    mapped = {tuple(int(reps[v]) for v in s) for s in cx.simplices}
    return mapped == complex_on_X.vertex_sets()


def epkt(emb, dirs, rips_scale: float, maxdim: int = 1) -> TransformResult:
    """Embedded persistence transform: Rips complex on ``Phi_k(X)`` in ``R^{2k}`` at ``rips_scale``.

    The Rips complex is built up to dimension ``maxdim + 1`` so that homology
    in degrees ``0..maxdim`` is that of the full Rips complex.
    """
    if not rips_scale >= 0:
        raise ValueError(f"rips_scale must be >= 0, got {rips_scale}")
    k = _same_k(emb, dirs)
    cx, reps = embedded_complex(emb, rips_scale, maxdim + 1)
    diags = tuple(compute_persistence(lower_star(cx, height_function(emb, d)[reps]), maxdim) for d in dirs)
    params = {
        "rips_scale": float(rips_scale),
        "maxdim": maxdim,
        "simplices": cx.f_vector(),
        "distinct_points": int(reps.size),
    }
    return TransformResult("e-PKT", k, tuple(dirs), diags, params)


def _euler_of(pkt: TransformResult, emb, kind: str, horizon: float | None) -> TransformResult:
    curves = []
    for d, diag in pkt:
        T = horizon if horizon is not None else float(height_function(emb, d).max()) + 1.0
        curves.append(euler_curve(diag, T))
    params = dict(pkt.params, horizon="max height + 1" if horizon is None else float(horizon))
    return TransformResult(kind, pkt.k, pkt.directions, tuple(curves), params)


def iekt(emb, complex_on_X: SimplicialComplex, dirs, maxdim: int | None = None, horizon: float | None = None):
    """Intrinsic Euler transform; infinite bars are cut at ``horizon`` (default: max height + 1 per direction)."""
    return _euler_of(ipkt(emb, complex_on_X, dirs, maxdim), emb, "i-EKT", horizon)


def eekt(emb, dirs, rips_scale: float, maxdim: int = 1, horizon: float | None = None):
    """Embedded Euler transform; horizon as in :func:`iekt`."""
    return _euler_of(epkt(emb, dirs, rips_scale, maxdim), emb, "e-EKT", horizon)


def per_direction_distances(T1: TransformResult, T2: TransformResult, mode: str = "bottleneck", p: float = 1.0):
    if len(T1) != len(T2) or any(a != b for a, b in zip(T1.directions, T2.directions)):
        raise ValueError("transforms were evaluated on different direction lists")
    out = []
    for (_, a), (_, b) in zip(T1, T2):
        if mode == "bottleneck":
            if not (isinstance(a, GradedDiagram) and isinstance(b, GradedDiagram)):
                raise TypeError("bottleneck mode needs persistence transforms")
            out.append(bottleneck_distance(a, b))
        elif mode == "euler_lp":
            if not (isinstance(a, StepFunction) and isinstance(b, StepFunction)):
                raise TypeError("euler_lp mode needs Euler transforms")
            out.append(lp_distance(a, b, p))
        else:
            raise ValueError(f"mode must be 'bottleneck' or 'euler_lp', got {mode!r}")
    return out


def transform_distance(T1: TransformResult, T2: TransformResult, mode: str = "bottleneck", p: float = 1.0) -> float:
    """Largest per-direction distance between two transforms on a shared direction list."""
    return max(per_direction_distances(T1, T2, mode, p), default=0.0)


def lipschitz_constant(emb) -> float:
    """Largest absolute real or imaginary coordinate; heights move by at most this times the l1 change in direction."""
    z = _coords(emb)
    if z.size == 0:
        return 0.0
    return float(max(np.abs(z.real).max(), np.abs(z.imag).max()))


def injectivity_report(TX: TransformResult, TY: TransformResult, A_X: float, A_Y: float) -> dict:
    """Compare two embedded transforms on the sampled directions only.

    Equality on a finite direction sample does not prove equality of the
    transforms, so the flag is named accordingly.  ``gh_rhs`` is the bound
    ``A_X + A_Y`` on the Gromov-Hausdorff distance that would follow from
    equal transforms.
    """
    dist = transform_distance(TX, TY)
    return {
        "max_bottleneck": dist,
        "not_falsified_on_sampled_directions": bool(dist == 0.0),
        "directions": len(TX),
        "gh_rhs": float(A_X + A_Y),
    }


# --------------------------------------------------------------------------
# export


def _curve_json(s: StepFunction) -> dict:
    return {"breakpoints": s.breakpoints.tolist(), "values": s.values.tolist(), "horizon": s.horizon}


def result_to_json(res: TransformResult) -> dict:
    entries = []
    for d, val in res:
        item = {"direction": d.vector.tolist()}
        if isinstance(val, GradedDiagram):
            item["diagram"] = val.to_json()
        else:
            item["curve"] = _curve_json(val)
        entries.append(item)
    return {"kind": res.kind, "k": res.k, "params": res.params, "entries": entries}


def write_json(res: TransformResult, path) -> None:
    Path(path).write_text(json.dumps(result_to_json(res)))


def write_distance_csv(distances, path, mode: str = "bottleneck") -> None:
    lines = [f"direction,{mode}"] + [f"{i},{float(x)!r}" for i, x in enumerate(distances)]
    Path(path).write_text("\n".join(lines) + "\n")
