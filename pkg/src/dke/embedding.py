"""The distance kernel embedding and the bounds built on it.

``Phi_k(x_i) = (sqrt(lambda_1) e_1[i], ..., sqrt(lambda_k) e_k[i])`` in C^k,
with the square root of a negative eigenvalue taken on the positive
imaginary axis.  The symmetric (unconjugated) bilinear form applied to two
embedded points recovers the first ``k`` terms of the eigen-expansion of the
distance, which is what the error function and all bound evaluators use.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from ._matching import matching_bottleneck
from .errors import HypothesisViolation, NumericFailure
from .mmspace import AbStandardness, MetricMeasureSpace
from .spectral import Spectrum, abs_ties, zero_mask

__all__ = [
    "Embedding",
    "ErrorSummary",
    "AnalyticBounds",
    "embed",
    "bilinear",
    "reconstruct_distance",
    "reconstruction_matrix",
    "error_matrix",
    "error_summary",
    "trunc_error_bound",
    "trunc_error_bound_matrix",
    "embed_norm_bound",
    "hausdorff_L2",
    "gh_bound_general",
    "gh_bound_finite",
    "stability_bound",
    "weyl_dk_bounds",
    "bottleneck_matching",
    "matching_bottleneck",
    "analytic_bounds",
    "eigenfunction_sup_bound",
    "embedding_to_json",
    "write_embedding_csv",
]

IMAG_TOL = 1e-9


@dataclass(frozen=True)
class Embedding:
    """Rows of ``coords`` are the embedded points ``Phi_k(x_i)``."""

    k: int
    coords: np.ndarray
    eigenvalues: np.ndarray
    spectrum: Spectrum
    source: MetricMeasureSpace | None = None

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def real(self) -> np.ndarray:
        return self.coords.real

    @property
    def imag(self) -> np.ndarray:
        return self.coords.imag

    def as_real(self) -> np.ndarray:
        """``(Phi^R, Phi^I)`` as an ``n x 2k`` real array; Euclidean norms are preserved."""
        return np.hstack([self.coords.real, self.coords.imag])


@dataclass(frozen=True)
class ErrorSummary:
    A: float  # sup of the error function
    B: float  # largest embedded norm
    errors: np.ndarray | None = None


@dataclass(frozen=True)
class AnalyticBounds:
    A_bound: float
    B_bound: float
    K: float
    tail: float  # sum of squared omitted eigenvalues


def _sqrt_eigs(lam: np.ndarray) -> np.ndarray:
    out = np.zeros(lam.shape, dtype=complex)
    pos, neg = lam > 0, lam < 0
    out[pos] = np.sqrt(lam[pos])
    out[neg] = 1j * np.sqrt(-lam[neg])
    return out


def embed(spectrum: Spectrum, k: int, source: MetricMeasureSpace | None = None) -> Embedding:
    """Truncated embedding ``Phi_k``; zero eigenvalues give zero columns."""
    n = spectrum.n
    if not (1 <= k <= n):
        raise ValueError(f"k must be in [1, {n}], got {k}")
    lam = np.array(spectrum.eigenvalues[:k], dtype=float)
    lam[zero_mask(spectrum.eigenvalues)[:k]] = 0.0
    coords = spectrum.vectors[:, :k] * _sqrt_eigs(lam)[None, :]
    coords.setflags(write=False)
    return Embedding(int(k), coords, lam, spectrum, source)


def bilinear(v, w) -> complex:
    """``[v, w] = sum_i v_i w_i`` (symmetric, no conjugation)."""
    v = np.asarray(v)
    w = np.asarray(w)
    if v.shape != w.shape:
        raise ValueError(f"length mismatch: {v.shape} vs {w.shape}")
    return complex(np.sum(v * w))


def _real_part(z, what):
    z = np.asarray(z)
    scale = max(1.0, float(np.abs(z.real).max()) if z.size else 1.0)
    if z.size and float(np.abs(z.imag).max()) > IMAG_TOL * scale:
        raise NumericFailure(f"{what} has imaginary residue {float(np.abs(z.imag).max()):.3g}")
    return np.real(z)


def reconstruct_distance(emb: Embedding, i: int, j: int) -> float:
    return float(_real_part(bilinear(emb.coords[i], emb.coords[j]), "bilinear form"))


def reconstruction_matrix(emb: Embedding) -> np.ndarray:
    """All ``[Phi_k(x_i), Phi_k(x_j)]`` at once."""
    return _real_part(emb.coords @ emb.coords.T, "bilinear form")


def _source(emb: Embedding) -> MetricMeasureSpace:
    if emb.source is None:
        raise ValueError("this embedding does not carry its source space; pass source= to embed()")
    return emb.source


def error_matrix(emb: Embedding) -> np.ndarray:
    return np.abs(reconstruction_matrix(emb) - _source(emb).dist)


def error_summary(emb: Embedding, keep_matrix: bool = False) -> ErrorSummary:
    err = error_matrix(emb)
    B = float(np.linalg.norm(emb.coords, axis=1).max())
    return ErrorSummary(float(err.max()), B, err if keep_matrix else None)


def _eigs(s) -> np.ndarray:
    if isinstance(s, Spectrum):
        return np.asarray(s.eigenvalues, dtype=float)
    return np.asarray(s, dtype=float)


def _omitted(lam: np.ndarray, k: int) -> float:
    return abs(float(lam[k])) if k < lam.size else 0.0


def trunc_error_bound(spectrum: Spectrum, k: int, i: int, j: int) -> float:
    """``|lambda_{k+1}| / sqrt(mu_i mu_j)``, bounding the error function at ``(x_i, x_j)``."""
    mu = spectrum.measure
    return _omitted(spectrum.eigenvalues, k) / math.sqrt(mu[i] * mu[j])


def trunc_error_bound_matrix(spectrum: Spectrum, k: int) -> np.ndarray:
    root = np.sqrt(spectrum.measure)
    return _omitted(spectrum.eigenvalues, k) / np.outer(root, root)


def embed_norm_bound(spectrum: Spectrum, i: int, variant: str = "via_row_norm") -> float:
    """Upper bound on ``||Phi_k(x_i)||_2`` valid for every ``k``.

    ``"via_row_norm"`` is ``sqrt|lambda_1| / sqrt(mu_i)``, which follows from
    the row-norm identity of a Q-orthonormal eigenbasis.  ``"as_printed"`` is
    ``sqrt|lambda_1| / mu_i``; it fails on spaces with an atom of mass below 1
    (the two-point example with masses (1, 4) is a counterexample at the
    heavier point), so it is reported but never relied upon.
    """
    top = math.sqrt(abs(float(spectrum.eigenvalues[0])))
    mu = float(spectrum.measure[i])
    if variant == "via_row_norm":
        return top / math.sqrt(mu)
    if variant == "as_printed":
        return top / mu
    raise ValueError(f"variant must be 'via_row_norm' or 'as_printed', got {variant!r}")


def _real_rows(e) -> np.ndarray:
    if isinstance(e, Embedding):
        return e.as_real()
    e = np.asarray(e)
    if np.iscomplexobj(e):
        return np.hstack([e.real, e.imag])
    return e.astype(float)


def _directed(P: np.ndarray, Q: np.ndarray, chunk: int) -> float:
    out = 0.0
    for s in range(0, P.shape[0], chunk):
        d = cdist(P[s:s + chunk], Q).min(axis=1).max()
        out = max(out, float(d))
    return out


def hausdorff_L2(embA, embB, chunk_elems: int = 4_000_000) -> float:
    """Hausdorff distance between two embedded point sets under the l2 norm of C^k.

    Exhaustive scan; accepts :class:`Embedding` objects or complex arrays.
    """
    if isinstance(embA, Embedding) and isinstance(embB, Embedding) and embA.k != embB.k:
        raise ValueError(f"embedding dimensions differ: {embA.k} vs {embB.k}")
    P, Q = _real_rows(embA), _real_rows(embB)
    if P.shape[1] != Q.shape[1]:
        raise ValueError(f"embedding dimensions differ: {P.shape[1] // 2} vs {Q.shape[1] // 2}")
    ca = max(1, chunk_elems // max(1, Q.shape[0]))
    cb = max(1, chunk_elems // max(1, P.shape[0]))
    return max(_directed(P, Q, ca), _directed(Q, P, cb))


def gh_bound_general(embX: Embedding, embY: Embedding, eps: float | None = None) -> float:
    """``2 eps min(B_X, B_Y) + A_X + A_Y + eps^2`` bounding the Gromov-Hausdorff distance."""
    if eps is None:
        eps = hausdorff_L2(embX, embY)
    sx, sy = error_summary(embX), error_summary(embY)
    return 2 * eps * min(sx.B, sy.B) + sx.A + sy.A + eps**2


def _measure(s) -> np.ndarray:
    if not isinstance(s, Spectrum):
        raise TypeError("this bound needs Spectrum objects (the atom masses enter it)")
    return s.measure


def gh_bound_finite(specX: Spectrum, specY: Spectrum, k: int, eps: float) -> float:
    """Finite-space Gromov-Hausdorff bound from spectra alone."""
    lx, ly = _eigs(specX), _eigs(specY)
    if not (1 <= k <= min(lx.size, ly.size)):
        raise ValueError(f"k must be in [1, {min(lx.size, ly.size)}], got {k}")
    theta = min(float(_measure(specX).min()), float(_measure(specY).min()))
    if not theta > 0:
        raise HypothesisViolation("minimum atom mass must be positive", "finite Gromov-Hausdorff bound")
    top = min(math.sqrt(abs(lx[0])), math.sqrt(abs(ly[0])))
    return 2 * eps * top / theta + eps**2 + (_omitted(lx, k) + _omitted(ly, k)) / theta


def _check_stability_hypotheses(lx, ly, k, ref):
    if not (1 <= k <= min(lx.size, ly.size)):
        raise ValueError(f"k must be in [1, {min(lx.size, ly.size)}], got {k}")
    for name, lam in (("first", lx), ("second", ly)):
        if np.any(zero_mask(lam)[:k]) or np.any(lam[:k] == 0):
            raise HypothesisViolation(f"{name} spectrum has a zero eigenvalue among the first {k}", ref)
        tied = [i for i in abs_ties(lam) if i < k - 1]
        if tied:
            raise HypothesisViolation(
                f"{name} spectrum has repeated |eigenvalue| at positions {tied} among the first {k}", ref
            )


def _cross_gaps(lx, ly, k) -> np.ndarray:
    g = np.abs(lx[:k, None] ** 2 - ly[None, :k] ** 2)
    np.fill_diagonal(g, np.inf)
    return g


def stability_bound(specX, specY, k: int, eps: float) -> float:
    """Upper bound on the Hausdorff distance between ``Phi_k(X)`` and ``Phi_k(Y)``.

    ``eps`` is the modified Prokhorov (for equal-size uniform samples: the
    matching bottleneck) distance between the samples.  With ``k = 1`` the
    separation is ``+inf`` and the eigenvector-rotation term vanishes.
    """
    lx, ly = _eigs(specX), _eigs(specY)
    ref = "embedding stability bound"
    _check_stability_hypotheses(lx, ly, k, ref)
    delta = float(_cross_gaps(lx, ly, k).min())
    if delta == 0:
        raise HypothesisViolation("spectral separation is zero", ref)
    tau1 = min(abs(lx[0]), abs(ly[0]))
    tauk = max(abs(lx[k - 1]), abs(ly[k - 1]))
    rk = math.sqrt(k)
    first = 0.0 if math.isinf(delta) else rk * 4 * math.sqrt(2) * (eps + tau1) / delta * math.sqrt(tau1) * eps
    second = rk * 2 * math.sqrt(2) * math.sqrt((eps + tau1) / tauk) * math.sqrt(eps)
    return float(first + second)


def weyl_dk_bounds(specX, specY, k: int, eps: float) -> list[tuple[float, float]]:
    """Per-index ``(|lambda_i^2 - nu_i^2| bound, sin(theta_i) bound)`` for ``i < k``.

    ``eps`` bounds the spectral norm of the perturbation.  The separation for
    index ``i`` is taken over ``j < k``, ``j != i``; it is ``+inf`` when that
    set is empty.
    """
    lx, ly = _eigs(specX), _eigs(specY)
    ref = "squared-eigenvalue perturbation bound"
    _check_stability_hypotheses(lx, ly, k, ref)
    gaps = _cross_gaps(lx, ly, k).min(axis=1)
    if np.any(gaps == 0):
        raise HypothesisViolation(f"zero separation at index {int(np.flatnonzero(gaps == 0)[0])}", ref)
    g = eps * (eps + 2 * abs(lx[0]))
    return [(float(g), 0.0 if math.isinf(d) else float(g / d)) for d in gaps]


def bottleneck_matching(ptsA, ptsB, metric="euclidean") -> float:
    """Bottleneck distance between two equal-size samples of a common metric space.

    ``metric`` is a scipy ``cdist`` metric name or a callable returning the
    ``m x m`` cross-distance matrix.
    """
    A, B = np.asarray(ptsA), np.asarray(ptsB)
    if len(A) != len(B):
        raise ValueError(f"samples must have equal cardinality, got {len(A)} and {len(B)}")
    if len(A) == 0:
        return 0.0
    if callable(metric):
        cross = metric(A, B)
    else:
        if A.ndim == 1:
            A, B = A[:, None], B[:, None]
        cross = cdist(A, B, metric=metric)
    return matching_bottleneck(cross)


def _ab_pieces(spectrum: Spectrum, ab: AbStandardness, count: int):
    lam = np.abs(_eigs(spectrum)[:count])
    if np.any(zero_mask(_eigs(spectrum))[:count]) or np.any(lam == 0):
        raise HypothesisViolation(f"zero eigenvalue among the first {count}; bound undefined", "ball-volume eigenfunction bounds")
    ball = math.sqrt(ab.a) * ab.r ** (ab.b / 2)
    return lam, ball, spectrum.vol


def eigenfunction_sup_bound(spectrum: Spectrum, ab: AbStandardness, i: int) -> float:
    """``1 / (sqrt(a) r^(b/2)) + r sqrt(vol) / |lambda_i|`` bounding ``max |e_i|`` (0-based ``i``)."""
    lam, ball, vol = _ab_pieces(spectrum, ab, i + 1)
    return 1.0 / ball + ab.r * math.sqrt(vol) / lam[i]


def analytic_bounds(spectrum: Spectrum, ab: AbStandardness, k: int) -> AnalyticBounds:
    """Worst-case bounds on the sup error ``A`` and the largest embedded norm ``B``.

    Valid whenever ``(a, b, r)`` is a true ball-volume lower bound for the
    space, e.g. from ``estimate_ab(..., conservative=True)``.
    """
    lam, ball, vol = _ab_pieces(spectrum, ab, k)
    root = np.sqrt(lam)
    B_bound = math.sqrt(float(np.sum((root / ball + ab.r * math.sqrt(vol) / root) ** 2)))
    K_i = math.sqrt(2) * (math.sqrt(vol) / ball + ab.r * vol / lam)
    K = math.sqrt(2) + float(K_i.sum())
    tail = float(np.sum(_eigs(spectrum)[k:] ** 2))
    A_bound = math.sqrt(tail) / (ab.a * ab.r**ab.b) + ab.r * K
    return AnalyticBounds(A_bound, B_bound, K, tail)


# --------------------------------------------------------------------------
# export


def embedding_to_json(emb: Embedding) -> dict:
    return {
        "k": emb.k,
        "eigenvalues": emb.eigenvalues.tolist(),
        "re": emb.coords.real.tolist(),
        "im": emb.coords.imag.tolist(),
    }


def write_embedding_csv(emb: Embedding, path) -> None:
    head = ",".join(f"re{j + 1},im{j + 1}" for j in range(emb.k))
    inter = np.empty((emb.n, 2 * emb.k))
    inter[:, 0::2] = emb.coords.real
    inter[:, 1::2] = emb.coords.imag
    lines = [head] + [",".join(repr(float(v)) for v in row) for row in inter]
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(emb: Embedding, path) -> None:
    Path(path).write_text(json.dumps(embedding_to_json(emb)))
