"""Experiment drivers: model-space samples, spectra, Hausdorff tables, constant tables, histograms, transforms.

Every function returns plain JSON-ready data; formatting and file output
live in :mod:`dke.cli`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._matching import matching_bottleneck
from .embedding import (
    analytic_bounds,
    embed,
    embed_norm_bound,
    error_summary,
    gh_bound_finite,
    gh_bound_general,
    hausdorff_L2,
    stability_bound,
    trunc_error_bound_matrix,
)
from .mmspace import (
    MetricMeasureSpace,
    cross_distance,
    estimate_ab,
    make_mms,
    read_csv,
    read_json,
    sample_lens,
    sample_sphere,
    sample_torus,
    uniform_measure,
)
from .persistence import build_rips
from .spectral import Spectrum, eigendecompose
from .transforms import (
    direction_grid,
    eekt,
    epkt,
    height_function,
    iekt,
    injectivity_report,
    ipkt,
    per_direction_distances,
)

__all__ = [
    "SpaceSpec",
    "SPACE_KINDS",
    "make_space",
    "default_radii",
    "normalized_spectrum",
    "spectrum_rows",
    "hausdorff_table",
    "bounds_table",
    "histograms",
    "transform_run",
    "common_horizon",
    "compare_report",
]

SPACE_KINDS = ("sphere", "torus", "lens", "file")


@dataclass(frozen=True)
class SpaceSpec:
    """Recipe for a sample: kind, size, seed and kind-specific parameters."""

    kind: str
    n: int = 500
    seed: int = 0
    metric: str = "geodesic"
    params: dict = field(default_factory=dict)
    name: str = ""

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "lens":
            return f"L({self.params.get('p')},{self.params.get('q')})"
        if self.kind == "sphere":
            return f"S{self.params.get('dim', 2)}"
        if self.kind == "torus":
            return "T2"
        return str(self.params.get("path", "file"))

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n, "seed": self.seed, "metric": self.metric,
                "params": dict(self.params), "name": self.label}


def make_space(spec: SpaceSpec) -> MetricMeasureSpace:
    p = spec.params
    if spec.kind == "sphere":
        return sample_sphere(spec.n, dim=int(p.get("dim", 2)), metric=spec.metric, seed=spec.seed)
    if spec.kind == "torus":
        return sample_torus(spec.n, R=float(p.get("R", 2.5)), r=float(p.get("r", 1.0)), seed=spec.seed)
    if spec.kind == "lens":
        return sample_lens(spec.n, int(p["p"]), int(p["q"]), seed=spec.seed)
    if spec.kind == "file":
        path = str(p["path"])
        return read_json(path) if path.endswith(".json") else read_csv(path)
    raise ValueError(f"unknown space kind {spec.kind!r}; choose from {SPACE_KINDS}")


def default_radii(mms: MetricMeasureSpace, count: int = 8) -> np.ndarray:
    """Log-spaced radii from ``diam / 50`` to ``diam / 5``."""
    return np.geomspace(mms.diam / 50, mms.diam / 5, count)


def normalized_spectrum(mms: MetricMeasureSpace, count: int | None = None) -> np.ndarray:
    """Eigenvalues for the uniform probability measure on the points (the ``1/n``-scaled distance matrix)."""
    uni = make_mms(mms.dist, uniform_measure(mms.n), check_triangle=False)
    lam = eigendecompose(uni).eigenvalues
    return lam if count is None else lam[:count]


def spectrum_rows(spaces: dict, count: int = 8) -> dict:
    return {name: normalized_spectrum(m, count).tolist() for name, m in spaces.items()}


def _spectra(spaces: dict) -> dict:
    return {name: eigendecompose(m) for name, m in spaces.items()}


def hausdorff_table(spaces: dict, k_values, pairs=None) -> list[dict]:
    """Hausdorff distance between embeddings for each pair of named spaces and each ``k``."""
    spectra = _spectra(spaces)
    if pairs is None:
        pairs = list(itertools.combinations(spaces, 2))
    rows = []
    for a, b in pairs:
        for k in k_values:
            ea = embed(spectra[a], k, spaces[a])
            eb = embed(spectra[b], k, spaces[b])
            rows.append({"pair": [a, b], "k": int(k), "hausdorff": hausdorff_L2(ea, eb)})
    return rows


def bounds_table(mms: MetricMeasureSpace, k_values, radii=None, spectrum: Spectrum | None = None) -> dict:
    """Measured ``A``, ``B`` against their analytic upper bounds for each ``k``."""
    spec = spectrum if spectrum is not None else eigendecompose(mms)
    radii = default_radii(mms) if radii is None else np.asarray(radii, dtype=float)
    ab = estimate_ab(mms, radii, conservative=True)
    norm_row = max(embed_norm_bound(spec, i, "via_row_norm") for i in range(mms.n))
    norm_printed = max(embed_norm_bound(spec, i, "as_printed") for i in range(mms.n))
    rows = []
    for k in k_values:
        e = embed(spec, k, mms)
        s = error_summary(e)
        an = analytic_bounds(spec, ab, k)
        rows.append({
            "k": int(k),
            "A": s.A,
            "B": s.B,
            "A_bound": an.A_bound,
            "B_bound": an.B_bound,
            "trunc_bound_max": float(trunc_error_bound_matrix(spec, k).max()),
            "norm_bound_via_row_norm": norm_row,
            "norm_bound_as_printed": norm_printed,
        })
    return {
        "n": mms.n,
        "diam": mms.diam,
        "ab": {"a": ab.a, "b": ab.b, "r": ab.r},
        "radii": radii.tolist(),
        "rows": rows,
    }


def histograms(mms: MetricMeasureSpace, k: int, eig_indices=(10, 20), bins: int = 30,
               spectrum: Spectrum | None = None) -> dict:
    """Histograms of ``|Phi_k(x)|`` and of ``|e_i(x)|`` for 1-based eigenfunction indices."""
    spec = spectrum if spectrum is not None else eigendecompose(mms)
    e = embed(spec, k, mms)
    out = {}

    def hist(values):
        counts, edges = np.histogram(values, bins=bins)
        return {"counts": counts.tolist(), "edges": edges.tolist(),
                "min": float(values.min()), "max": float(values.max())}

    out["embedding_norm"] = hist(np.linalg.norm(e.coords, axis=1))
    for i in eig_indices:
        if 1 <= i <= mms.n:
            out[f"eigenfunction_{i}"] = hist(np.abs(spec.vectors[:, i - 1]))
    return out


def transform_run(mms: MetricMeasureSpace, k: int, dirs: int, seed: int, rips_scale: float,
                  intrinsic_scale: float | None = None, maxdim: int = 1, spectrum: Spectrum | None = None):
    """All four transforms on one space with a shared direction list.

    Homology runs over degrees ``0..maxdim``; both Rips complexes are built
    one dimension higher.
    """
    spec = spectrum if spectrum is not None else eigendecompose(mms)
    e = embed(spec, k, mms)
    directions = direction_grid(k, dirs, seed)
    cx = build_rips(mms, rips_scale if intrinsic_scale is None else intrinsic_scale, maxdim + 1)
    T = common_horizon(e, directions)
    return {
        "i-PKT": ipkt(e, cx, directions, maxdim),
        "e-PKT": epkt(e, directions, rips_scale, maxdim),
        "i-EKT": iekt(e, cx, directions, maxdim, horizon=T),
        "e-EKT": eekt(e, directions, rips_scale, maxdim, horizon=T),
    }


def common_horizon(e, directions) -> float:
    """One horizon for every direction: the largest height over all of them, plus one."""
    top = max((float(height_function(e, d).max()) for d in directions), default=0.0)
    return top + 1.0


def _shares_sample_space(X: MetricMeasureSpace, Y: MetricMeasureSpace) -> bool:
    kx, ky = X.meta.get("kind"), Y.meta.get("kind")
    if kx is None or kx != ky or X.n != Y.n:
        return False
    keys = ("dim", "metric", "R", "r", "p", "q")
    return all(X.meta.get(key) == Y.meta.get(key) for key in keys)


def compare_report(X: MetricMeasureSpace, Y: MetricMeasureSpace, k: int, dirs: int = 16, seed: int = 0,
                   rips_scale: float | None = None, maxdim: int = 1) -> dict:
    """Embedding-level comparison of two spaces.

    The stability bound needs both samples to live in one metric space with
    equal size; otherwise it is reported as not applicable.
    """
    sx, sy = eigendecompose(X), eigendecompose(Y)
    ex, ey = embed(sx, k, X), embed(sy, k, Y)
    eps = hausdorff_L2(ex, ey)
    ax, ay = error_summary(ex), error_summary(ey)
    rep = {
        "k": int(k),
        "hausdorff": eps,
        "A_X": ax.A,
        "A_Y": ay.A,
        "B_X": ax.B,
        "B_Y": ay.B,
        "gh_bound_general": gh_bound_general(ex, ey, eps),
        "gh_bound_finite": gh_bound_finite(sx, sy, k, eps),
    }
    if _shares_sample_space(X, Y):
        match = matching_bottleneck(cross_distance(X, Y))
        rep["sample_bottleneck"] = match
        rep["stability_bound"] = stability_bound(sx, sy, k, match)
    else:
        rep["stability_bound"] = None
        rep["stability_note"] = "samples do not share an ambient space of equal size"
    if rips_scale is not None:
        directions = direction_grid(k, dirs, seed)
        tx = epkt(ex, directions, rips_scale, maxdim)
        ty = epkt(ey, directions, rips_scale, maxdim)
        rep["transform_distances"] = per_direction_distances(tx, ty)
        rep["transform_distance"] = max(rep["transform_distances"], default=0.0)
        rep["injectivity"] = injectivity_report(tx, ty, ax.A, ay.A)
    return rep
