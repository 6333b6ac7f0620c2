"""Distance kernel operator of a finite metric measure space and its spectrum.

For points ``x_1..x_n`` with masses ``mu_i`` the operator is the matrix
``D[i, j] = d(x_i, x_j) * mu_j``.  It is self-adjoint for the weighted inner
product ``<v, w>_Q = sum_i v_i w_i mu_i``, so it is diagonalised through the
symmetric similarity transform ``Q^(1/2) A Q^(1/2)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import MultiplicityWarning, NumericFailure
from .mmspace import MetricMeasureSpace

__all__ = [
    "KernelMatrix",
    "Spectrum",
    "build_operator",
    "eigendecompose",
    "fix_signs",
    "top_eigenvalue_bound",
    "order_by_magnitude",
    "abs_ties",
    "zero_mask",
    "spectrum_to_json",
    "spectrum_from_json",
    "write_eigenvalues_csv",
    "SIGN_TOL",
    "ZERO_REL",
    "TIE_REL",
]

SIGN_TOL = 1e-9
# |lambda| <= ZERO_REL * |lambda_1| counts as a zero eigenvalue
ZERO_REL = 1e-12
# consecutive |lambda| closer than TIE_REL * |lambda_1| count as tied
TIE_REL = 1e-10

DEFAULT_SIGN_RULES = ("abs", "max_entry")
SIGN_RULES = ("abs", "constant", "max_entry")


@dataclass(frozen=True)
class KernelMatrix:
    """``D = A Q`` with ``A`` the distance matrix and ``Q = diag(measure)``."""

    D: np.ndarray
    A: np.ndarray
    measure: np.ndarray

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.measure)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues by decreasing ``|lambda|`` with Q-orthonormal eigenvector columns.

    ``sign_rule[i]`` names the convention that fixed the sign of column ``i``;
    ``ties`` lists 0-based ``i`` with ``|lambda_i| ~ |lambda_{i+1}|`` (both nonzero).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    measure: np.ndarray
    sign_rule: tuple = ()
    ties: tuple = ()

    @property
    def n(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def vol(self) -> float:
        return float(self.measure.sum())

    @property
    def rows(self) -> np.ndarray:
        return self.vectors


def build_operator(mms: MetricMeasureSpace) -> KernelMatrix:
    A = np.asarray(mms.dist, dtype=float)
    mu = np.asarray(mms.measure, dtype=float)
    return KernelMatrix(A * mu[None, :], A, mu)


def order_by_magnitude(values, tol_rel: float = TIE_REL) -> np.ndarray:
    """Permutation sorting ``values`` by decreasing magnitude, positives first on ties."""
    values = np.asarray(values, dtype=float)
    idx = np.lexsort((-values, -np.abs(values)))
    if idx.size == 0:
        return idx
    tol = tol_rel * abs(values[idx[0]])
    # rounding can put -|l| a hair above +|l|; restore positive-first
    for i in range(idx.size - 1):
        a, b = values[idx[i]], values[idx[i + 1]]
        if a < 0 < b and abs(a) - abs(b) <= tol:
            idx[i], idx[i + 1] = idx[i + 1], idx[i]
    return idx


def zero_mask(eigenvalues) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        return np.zeros(0, dtype=bool)
    top = np.abs(lam).max()
    return np.abs(lam) <= ZERO_REL * top


def abs_ties(eigenvalues) -> tuple:
    """0-based ``i`` where nonzero ``|lambda_i|`` and ``|lambda_{i+1}|`` nearly coincide."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < 2:
        return ()
    mag = np.abs(lam)
    top = mag.max()
    if top == 0:
        return ()
    zero = zero_mask(lam)
    gap = np.abs(mag[:-1] - mag[1:])
    hit = (gap < TIE_REL * top) & ~zero[:-1] & ~zero[1:]
    return tuple(int(i) for i in np.flatnonzero(hit))


def _as_kernel(obj) -> KernelMatrix:
    if isinstance(obj, KernelMatrix):
        return obj
    if isinstance(obj, MetricMeasureSpace):
        return build_operator(obj)
    raise TypeError(f"expected KernelMatrix or MetricMeasureSpace, got {type(obj).__name__}")


def eigendecompose(kernel, sign_rules=DEFAULT_SIGN_RULES) -> Spectrum:
    """Full eigendecomposition of a distance kernel operator.

    Solves the symmetric problem for ``S = Q^(1/2) A Q^(1/2)`` and maps each
    eigenvector ``w`` back to ``e = Q^(-1/2) w``, so that ``E^T Q E = I``.
    Columns are ordered by decreasing ``|lambda|`` (positive member of a
    ``+-`` pair first) and sign-fixed by :func:`fix_signs`.

    Emits :class:`MultiplicityWarning` when two nonzero eigenvalues (not just
    their magnitudes) nearly coincide.
    """
    km = _as_kernel(kernel)
    root = np.sqrt(km.measure)
    S = root[:, None] * km.A * root[None, :]
    S = 0.5 * (S + S.T)
    try:
        w, W = scipy.linalg.eigh(S)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericFailure(f"symmetric eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(W))):
        raise NumericFailure("symmetric eigensolver returned non-finite values")

    idx = order_by_magnitude(w)
    w, W = w[idx], W[:, idx]
    E = W / root[:, None]

    top = abs(w[0]) if w.size else 0.0
    if w.size > 1 and top > 0:
        zero = zero_mask(w)
        close = (np.abs(np.diff(w)) < TIE_REL * top) & ~zero[:-1] & ~zero[1:]
        if close.any():
            where = [int(i) for i in np.flatnonzero(close)]
            warnings.warn(
                f"near-repeated eigenvalues at positions {where[:10]}; eigenvectors are not unique",
                MultiplicityWarning,
                stacklevel=2,
            )
    spec = Spectrum(w, E, km.measure.copy(), (), abs_ties(w))
    return fix_signs(spec, sign_rules)


def _max_entry_index(col: np.ndarray) -> int:
    mag = np.abs(col)
    top = mag.max()
    return int(np.flatnonzero(mag >= top * (1 - SIGN_TOL))[0])


def fix_signs(spectrum: Spectrum, rules=DEFAULT_SIGN_RULES) -> Spectrum:
    """Choose the sign of each eigenvector column deterministically.

    Rules are tried in order until one is decisive (beyond ``SIGN_TOL``):

    ``"abs"``
        ``<e, |e|>_Q > 0``.
    ``"constant"``
        ``<1, e>_Q > 0``.
    ``"max_entry"``
        the first entry of largest magnitude is positive (always decisive).
    """
    for r in rules:
        if r not in SIGN_RULES:
            raise ValueError(f"unknown sign rule {r!r}; choose from {SIGN_RULES}")
    E = np.array(spectrum.vectors, dtype=float, copy=True)
    mu = spectrum.measure
    fired = []
    for i in range(E.shape[1]):
        col = E[:, i]
        rule_used = None
        for rule in tuple(rules) + ("max_entry",):
            if rule == "abs":
                s = float(np.sum(mu * col * np.abs(col)))
            elif rule == "constant":
                s = float(np.sum(mu * col))
            else:
                s = float(col[_max_entry_index(col)]) if np.any(col) else 1.0
            if abs(s) > SIGN_TOL or rule == "max_entry":
                if s < 0:
                    E[:, i] = -col
                rule_used = rule
                break
        fired.append(rule_used)
    return replace(spectrum, vectors=E, sign_rule=tuple(fired))


def top_eigenvalue_bound(mms: MetricMeasureSpace) -> float:
    """``diam(X) * vol(X)``, an upper bound on ``|lambda_1|``."""
    return mms.diam * mms.vol


# --------------------------------------------------------------------------
# export


def spectrum_to_json(spec: Spectrum) -> dict:
    return {
        "eigenvalues": spec.eigenvalues.tolist(),
        "vectors": spec.vectors.T.tolist(),  # column-major: one list per eigenvector
        "measure": spec.measure.tolist(),
        "sign_rule": list(spec.sign_rule),
    }


def spectrum_from_json(obj: dict) -> Spectrum:
    lam = np.asarray(obj["eigenvalues"], dtype=float)
    E = np.asarray(obj["vectors"], dtype=float).T.reshape(lam.size, lam.size)
    mu = np.asarray(obj["measure"], dtype=float) if "measure" in obj else np.ones(lam.size)
    return Spectrum(lam, E, mu, tuple(obj.get("sign_rule", ())), abs_ties(lam))


def write_eigenvalues_csv(spec: Spectrum, path, count: int | None = None) -> None:
    lam = spec.eigenvalues if count is None else spec.eigenvalues[:count]
    lines = ["index,eigenvalue"] + [f"{i + 1},{float(v)!r}" for i, v in enumerate(lam)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(spec: Spectrum, path) -> None:
    Path(path).write_text(json.dumps(spectrum_to_json(spec)))
