"""Finite metric measure spaces: construction, validation, model samplers, I/O.

A finite metric measure space is a symmetric distance matrix together with a
vector of strictly positive atom masses.  The samplers draw uniform i.i.d.
points from the model manifolds used in the experiments (spheres, an embedded
torus, lens spaces with their round metric) and return the induced finite
space with the uniform probability measure.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import MetricError

__all__ = [
    "MetricMeasureSpace",
    "AbStandardness",
    "Violation",
    "make_mms",
    "validate_metric",
    "uniform_measure",
    "sample_sphere",
    "sample_torus",
    "sample_lens",
    "lens_generator",
    "lens_distance",
    "sphere_distance",
    "cross_distance",
    "ball_volumes",
    "estimate_ab",
    "to_json",
    "from_json",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
]

# Above this size the O(n^3) triangle check is skipped unless requested.
TRIANGLE_CHECK_LIMIT = 2000
REL_TOL = 1e-9
# smallest exponent reported by estimate_ab
B_FLOOR = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MetricMeasureSpace:
    """A validated finite metric measure space.

    ``points`` optionally carries ambient coordinates of a sampled space so
    that two samples of the same model can be compared in their common space
    (see :func:`cross_distance`); it plays no role in the spectral theory.
    """

    dist: np.ndarray
    measure: np.ndarray
    label: str = ""
    points: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.measure.shape[0])

    @property
    def vol(self) -> float:
        return float(self.measure.sum())

    @property
    def diam(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def permuted(self, perm: Sequence[int]) -> "MetricMeasureSpace":
        """Relabel the points: point ``i`` of the result is point ``perm[i]``."""
        perm = np.asarray(perm)
        pts = None if self.points is None else self.points[perm]
        return MetricMeasureSpace(
            _frozen(self.dist[np.ix_(perm, perm)]),
            _frozen(self.measure[perm]),
            self.label,
            None if pts is None else _frozen(pts),
            dict(self.meta),
        )


@dataclass(frozen=True)
class AbStandardness:
    """Lower ball-volume bound ``mu(B(x, s)) >= a * s**b`` for all ``s <= r``."""

    a: float
    b: float
    r: float

    def __post_init__(self):
        for name in ("a", "b", "r"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"AbStandardness.{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class Violation:
    kind: str  # shape | asymmetry | negative | diagonal | triangle | measure
    indices: tuple
    value: float

    def __str__(self):
        return f"{self.kind} at {self.indices}: {self.value:.6g}"


def validate_metric(
    dist,
    measure=None,
    *,
    check_triangle: bool | None = None,
    max_reports: int = 20,
) -> list[Violation]:
    """Return every invariant violation of a distance matrix and measure.

    Accepts either a :class:`MetricMeasureSpace` or raw arrays.  An empty
    list means the input is valid.  Tolerances are ``1e-9 * diam`` (absolute
    ``1e-9`` floor for zero-diameter inputs).  At most ``max_reports``
    violations of each kind are listed.
    """
    if isinstance(dist, MetricMeasureSpace):
        dist, measure = dist.dist, dist.measure
    d = np.asarray(dist, dtype=float)
    out: list[Violation] = []
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [Violation("shape", tuple(d.shape), float("nan"))]
    n = d.shape[0]
    if measure is not None:
        m = np.asarray(measure, dtype=float)
        if m.shape != (n,):
            return [Violation("shape", (n, tuple(m.shape)), float("nan"))]
    else:
        m = None
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        out.append(Violation("negative", (int(i), int(j)), float(d[i, j])))
        return out

    diam = float(np.abs(d).max()) if n else 0.0
    tol = REL_TOL * diam if diam > 0 else REL_TOL

    def report(kind, mask, values):
        idx = np.argwhere(mask)
        for row in idx[:max_reports]:
            t = tuple(int(x) for x in row)
            out.append(Violation(kind, t, float(values[t])))

    asym = np.abs(d - d.T)
    report("asymmetry", np.triu(asym > tol, 1), asym)
    report("negative", d < -tol, d)
    diag = np.abs(np.diag(d))
    for i in np.flatnonzero(diag > tol)[:max_reports]:
        out.append(Violation("diagonal", (int(i),), float(d[i, i])))

    if check_triangle is None:
        check_triangle = n <= TRIANGLE_CHECK_LIMIT
    if check_triangle and n >= 3:
        found = 0
        s = 0.5 * (d + d.T)
        buf = np.empty_like(s)
        for l in range(n):
            np.add(s[:, l, None], s[None, l, :], out=buf)
            bad = s > buf + tol
            if bad.any():
                for i, j in np.argwhere(bad):
                    if found >= max_reports:
                        break
                    out.append(Violation("triangle", (int(i), int(j), l), float(s[i, j] - buf[i, j])))
                    found += 1
            if found >= max_reports:
                break

    if m is not None:
        for i in np.flatnonzero(~(m > 0) | ~np.isfinite(m))[:max_reports]:
            out.append(Violation("measure", (int(i),), float(m[i])))
    return out


def make_mms(
    dist,
    measure=None,
    label: str = "",
    *,
    check_triangle: bool | None = None,
    points=None,
    meta: dict | None = None,
) -> MetricMeasureSpace:
    """Validate ``dist`` and ``measure`` and build a :class:`MetricMeasureSpace`.

    ``measure`` defaults to the uniform probability measure.  The triangle
    inequality is checked for ``n <= 2000`` unless ``check_triangle`` says
    otherwise.  The stored matrix is exactly symmetric with zero diagonal.

    Raises :class:`MetricError` listing every violation found.
    """
    d = np.asarray(dist, dtype=float)
    if d.ndim == 0 or d.size == 0:
        raise MetricError("distance matrix must be a nonempty square matrix",
                          [Violation("shape", tuple(d.shape), float("nan"))])
    if measure is None and d.ndim == 2:
        measure = uniform_measure(d.shape[0])
    violations = validate_metric(d, measure, check_triangle=check_triangle)
    if violations:
        kinds = sorted({v.kind for v in violations})
        raise MetricError(
            f"invalid metric measure space ({', '.join(kinds)}): " + "; ".join(map(str, violations[:5])),
            violations,
        )
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    np.maximum(d, 0.0, out=d)
    return MetricMeasureSpace(
        _frozen(d),
        _frozen(measure),
        label,
        None if points is None else _frozen(points),
        dict(meta or {}),
    )


def uniform_measure(n: int, total: float = 1.0) -> np.ndarray:
    return np.full(n, total / n)


# --------------------------------------------------------------------------
# samplers


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _chord_to_arc(chord: np.ndarray) -> np.ndarray:
    # 2 asin(c/2) == arccos(<x, y>) on the unit sphere, without arccos's
    # loss of precision for nearby points.
    return 2.0 * np.arcsin(np.minimum(chord * 0.5, 1.0))


def sphere_distance(P, Q, metric: str = "geodesic") -> np.ndarray:
    """Cross distances between unit vectors ``P`` and ``Q``."""
    chord = cdist(P, Q)
    if metric == "chordal":
        return chord
    if metric == "geodesic":
        return _chord_to_arc(chord)
    raise ValueError(f"metric must be 'geodesic' or 'chordal', got {metric!r}")


def _finish(dist: np.ndarray) -> np.ndarray:
    dist = np.minimum(dist, dist.T)
    np.fill_diagonal(dist, 0.0)
    return dist


def _check_count(n):
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n}")


def sample_sphere(n: int, dim: int = 2, metric: str = "geodesic", seed: int = 0) -> MetricMeasureSpace:
    """Uniform i.i.d. sample of the unit ``dim``-sphere (``dim`` in {2, 3})."""
    _check_count(n)
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    rng = np.random.default_rng(seed)
    pts = _unit_rows(rng.standard_normal((n, dim + 1)))
    dist = _finish(sphere_distance(pts, pts, metric))
    return make_mms(
        dist, uniform_measure(n), f"S{dim}-{metric}-n{n}-s{seed}",
        check_triangle=False, points=pts,
        meta={"kind": "sphere", "dim": dim, "metric": metric, "seed": seed},
    )


def sample_torus(n: int, R: float = 2.5, r: float = 1.0, seed: int = 0) -> MetricMeasureSpace:
    """Area-uniform i.i.d. sample of the torus of radii ``R > r > 0`` in R^3.

    Distances are Euclidean in the ambient space.
    """
    _check_count(n)
    if not (R > r > 0):
        raise ValueError(f"need R > r > 0, got R={R}, r={r}")
    rng = np.random.default_rng(seed)
    theta = np.empty(0)
    while theta.size < n:
        # rejection sampling of the minor angle, density proportional to R + r cos(theta)
        t = rng.uniform(0.0, 2 * np.pi, 2 * n)
        u = rng.uniform(0.0, 1.0, 2 * n)
        theta = np.concatenate([theta, t[u * (R + r) <= R + r * np.cos(t)]])
    theta = theta[:n]
    phi = rng.uniform(0.0, 2 * np.pi, n)
    w = R + r * np.cos(theta)
    pts = np.column_stack([w * np.cos(phi), w * np.sin(phi), r * np.sin(theta)])
    dist = _finish(cdist(pts, pts))
    return make_mms(
        dist, uniform_measure(n), f"T2-R{R:g}-r{r:g}-n{n}-s{seed}",
        check_triangle=False, points=pts,
        meta={"kind": "torus", "R": R, "r": r, "seed": seed},
    )


def lens_generator(p: int, q: int, power: int = 1) -> np.ndarray:
    """4x4 real matrix of ``(z1, z2) -> (zeta^m z1, zeta^(m q) z2)``, ``zeta = e^(2 pi i / p)``.

    Points of S^3 in C^2 are stored as real 4-vectors ``(Re z1, Im z1, Re z2, Im z2)``.
    """
    a1 = 2 * np.pi * power / p
    a2 = 2 * np.pi * power * q / p
    g = np.zeros((4, 4))
    g[0:2, 0:2] = [[np.cos(a1), -np.sin(a1)], [np.sin(a1), np.cos(a1)]]
    g[2:4, 2:4] = [[np.cos(a2), -np.sin(a2)], [np.sin(a2), np.cos(a2)]]
    return g


def _check_lens(p, q):
    if int(p) != p or p < 1 or int(q) != q:
        raise ValueError(f"lens parameters must be integers with p >= 1, got p={p}, q={q}")
    if math.gcd(int(p), int(q)) != 1:
        raise ValueError(f"lens space L({p},{q}) needs gcd(p, q) = 1")


def lens_distance(P, Q, p: int, q: int) -> np.ndarray:
    """Quotient round-metric distances between orbits of unit 4-vectors ``P`` and ``Q``.

    ``d([x], [y]) = min_m arccos <x, g^m y>`` over the ``p`` group elements.
    """
    _check_lens(p, q)
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    chord = cdist(P, Q)
    for m in range(1, p):
        np.minimum(chord, cdist(P, Q @ lens_generator(p, q, m).T), out=chord)
    return _chord_to_arc(chord)


def sample_lens(n: int, p: int, q: int, seed: int = 0) -> MetricMeasureSpace:
    """Uniform i.i.d. sample of the lens space ``L(p, q)`` with its spherical metric.

    Uses the same random stream as ``sample_sphere(n, dim=3, seed=seed)``, so
    ``p = 1`` reproduces that sample exactly.
    """
    _check_count(n)
    _check_lens(p, q)
    rng = np.random.default_rng(seed)
    pts = _unit_rows(rng.standard_normal((n, 4)))
    dist = _finish(lens_distance(pts, pts, p, q))
    return make_mms(
        dist, uniform_measure(n), f"L({p},{q})-n{n}-s{seed}",
        check_triangle=False, points=pts,
        meta={"kind": "lens", "p": p, "q": q, "seed": seed},
    )


def cross_distance(X: MetricMeasureSpace, Y: MetricMeasureSpace) -> np.ndarray:
    """Distances between the points of two samples of the same model space."""
    if X.points is None or Y.points is None:
        raise ValueError("cross distances need sampled spaces that carry ambient points")
    kx, ky = X.meta.get("kind"), Y.meta.get("kind")
    if kx != ky:
        raise ValueError(f"spaces are samples of different models ({kx} vs {ky})")
    if kx == "lens":
        if (X.meta["p"], X.meta["q"]) != (Y.meta["p"], Y.meta["q"]):
            raise ValueError("lens samples of different lens spaces")
        return lens_distance(X.points, Y.points, X.meta["p"], X.meta["q"])
    if kx == "sphere":
        if X.meta["metric"] != Y.meta["metric"] or X.meta["dim"] != Y.meta["dim"]:
            raise ValueError("sphere samples with different dimension or metric")
        return sphere_distance(X.points, Y.points, X.meta["metric"])
    if kx == "torus":
        return cdist(X.points, Y.points)
    raise ValueError(f"no common ambient metric known for kind {kx!r}")


# --------------------------------------------------------------------------
# (a, b)-standardness


def ball_volumes(mms: MetricMeasureSpace, radii) -> np.ndarray:
    """``min_x mu(B(x, s))`` for each radius ``s`` (closed balls)."""
    radii = np.asarray(radii, dtype=float)
    order = np.argsort(mms.dist, axis=1)
    srt = np.take_along_axis(mms.dist, order, axis=1)
    cum = np.cumsum(mms.measure[order], axis=1)
    out = np.empty(radii.shape)
    for t, s in enumerate(radii):
        # each ball contains its centre, so counts >= 1
        counts = (srt <= s).sum(axis=1)
        out[t] = cum[np.arange(mms.n), counts - 1].min()
    return out


def estimate_ab(mms: MetricMeasureSpace, radii, conservative: bool = False) -> AbStandardness:
    """Fit ``log v(s) = log a + b log s`` to minimal ball volumes ``v(s)``.

    With ``conservative=True`` the intercept is lowered so that
    ``v(s) >= a s**b`` holds at every supplied radius; that makes the result
    a valid (a, b)-standardness certificate on those radii, which the
    analytic error bounds require.  The threshold ``r`` is ``max(radii)``.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a nonempty 1-d sequence")
    if np.any(radii <= 0) or np.any(np.diff(radii) < 0):
        raise ValueError("radii must be positive and sorted ascending")
    if mms.diam > 0 and radii[-1] > mms.diam:
        raise ValueError(f"radius {radii[-1]} exceeds the diameter {mms.diam}")
    v = ball_volumes(mms, radii)
    if np.any(v <= 0):
        raise ArithmeticError("a ball of positive radius has zero mass; the measure is not positive")
    ls, lv = np.log(radii), np.log(v)
    if np.ptp(ls) == 0:
        b, loga = 0.0, float(lv.mean())
    else:
        b, loga = np.polyfit(ls, lv, 1)
    if conservative:
        loga = float(np.min(lv - b * ls))
    b = float(b)
    if b < -B_FLOOR:
        raise ArithmeticError(f"fitted ball-growth exponent is negative ({b}); radii are unsuitable")
    # flat volume curves (a single point, well-separated atoms) fit b = 0
    b = max(b, B_FLOOR)
    return AbStandardness(float(np.exp(loga)), b, float(radii[-1]))


# --------------------------------------------------------------------------
# I/O

HEADER = "# dke-mms v1 n={n}"


def to_json(mms: MetricMeasureSpace) -> dict[str, Any]:
    return {
        "n": mms.n,
        "dist": mms.dist.tolist(),
        "measure": mms.measure.tolist(),
        "label": mms.label,
    }


def from_json(obj: dict[str, Any], **kw) -> MetricMeasureSpace:
    mms = make_mms(obj["dist"], obj["measure"], obj.get("label", ""), **kw)
    if "n" in obj and obj["n"] != mms.n:
        raise MetricError(f"declared n={obj['n']} but matrix has {mms.n} rows")
    return mms


def write_json(mms: MetricMeasureSpace, path) -> None:
    Path(path).write_text(json.dumps(to_json(mms)))


def read_json(path, **kw) -> MetricMeasureSpace:
    return from_json(json.loads(Path(path).read_text()), **kw)


def _fmt_row(values: Iterable[float]) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_csv(mms: MetricMeasureSpace, path) -> None:
    """Row-major distance matrix, then one line of measures."""
    lines = [HEADER.format(n=mms.n)]
    lines += [_fmt_row(row) for row in mms.dist]
    lines.append(_fmt_row(mms.measure))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path, label: str = "", **kw) -> MetricMeasureSpace:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("# dke-mms v1"):
        raise MetricError(f"{path}: missing '# dke-mms v1 n=<n>' header")
    try:
        n = int(text[0].split("n=")[1])
    except (IndexError, ValueError):
        raise MetricError(f"{path}: malformed header {text[0]!r}") from None
    rows = [ln for ln in text[1:] if ln.strip()]
    if len(rows) != n + 1:
        raise MetricError(f"{path}: expected {n} matrix rows and one measure row, got {len(rows)} rows")
    dist = np.array([[float(x) for x in ln.split(",")] for ln in rows[:n]])
    measure = np.array([float(x) for x in rows[n].split(",")])
    return make_mms(dist, measure, label or Path(path).stem, **kw)
