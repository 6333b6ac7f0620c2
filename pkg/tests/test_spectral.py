import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dke.errors import MultiplicityWarning
from dke.mmspace import make_mms, sample_sphere
from dke.spectral import (
    abs_ties,
    build_operator,
    eigendecompose,
    fix_signs,
    order_by_magnitude,
    spectrum_from_json,
    spectrum_to_json,
    top_eigenvalue_bound,
    write_eigenvalues_csv,
    zero_mask,
)
from oracles import random_mms


def simplex(n, delta=1.0):
    return make_mms(delta * (np.ones((n, n)) - np.eye(n)))


def test_operator_two_point(two_point):
    km = build_operator(two_point)
    assert np.array_equal(km.D, [[0, 4], [1, 0]])


def test_operator_one_point_and_uniform():
    assert np.array_equal(build_operator(make_mms([[0]], [1])).D, [[0]])
    m = sample_sphere(10, seed=0)
    assert np.allclose(build_operator(m).D, m.dist / 10, rtol=0, atol=1e-15)


def test_operator_self_adjoint(rng):
    m = random_mms(rng, n=20)
    km = build_operator(m)
    QD = m.measure[:, None] * km.D
    assert np.abs(QD - QD.T).max() <= 1e-12 * np.abs(km.D).max()


def test_two_point_spectrum(two_point):
    s = eigendecompose(two_point)
    assert np.allclose(s.eigenvalues, [2, -2], atol=1e-12)
    assert np.allclose(s.vectors * np.sqrt(2), [[1, 1], [0.5, -0.5]], atol=1e-12)


def test_simplex_top_eigenvalue():
    n, delta = 7, 1.5
    with pytest.warns(MultiplicityWarning):
        s = eigendecompose(simplex(n, delta))
    assert abs(s.eigenvalues[0] - delta * (n - 1) / n) <= 1e-12
    assert np.all(s.vectors[:, 0] > 0)
    assert np.allclose(s.vectors[:, 0], 1.0)
    assert top_eigenvalue_bound(simplex(n, delta)) == pytest.approx(delta)


def test_one_point_spectrum():
    s = eigendecompose(make_mms([[0]], [1]))
    assert s.eigenvalues.tolist() == [0.0]
    assert top_eigenvalue_bound(make_mms([[0]], [1])) == 0


def test_top_eigenvalue_bound_two_point(two_point):
    assert top_eigenvalue_bound(two_point) == 5


def test_order_positive_first():
    vals = np.array([-2.0, 1.0, 2.0, -0.5, 0.0])
    assert vals[order_by_magnitude(vals)].tolist() == [2.0, -2.0, 1.0, -0.5, 0.0]


def test_zero_mask_and_ties():
    lam = np.array([2.0, -2.0, 1.0, 1e-13])
    assert zero_mask(lam).tolist() == [False, False, False, True]
    assert abs_ties(lam) == (0,)


def test_sign_rules():
    mu = np.array([0.5, 0.5])
    from dke.spectral import Spectrum

    pos = Spectrum(np.array([1.0, 0.5]), np.array([[1.0, 1.0], [1.0, -1.0]]), mu, (), ())
    out = fix_signs(pos)
    assert np.array_equal(out.vectors[:, 0], [1, 1])
    neg = Spectrum(pos.eigenvalues, -pos.vectors, mu, (), ())
    assert np.array_equal(fix_signs(neg).vectors[:, 0], [1, 1])
    # the balanced column defeats both integral rules and falls to the largest entry
    assert fix_signs(neg).vectors[:, 1].tolist() == [1, -1]
    assert fix_signs(neg).sign_rule == ("abs", "max_entry")
    chained = fix_signs(neg, ("abs", "constant", "max_entry"))
    assert chained.sign_rule == ("abs", "max_entry")
    with pytest.raises(ValueError):
        fix_signs(pos, ("nope",))


def test_balanced_two_point_uniform_is_deterministic():
    m = make_mms([[0, 1], [1, 0]])
    a, b = eigendecompose(m), eigendecompose(m)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert a.sign_rule[1] == "max_entry"


def test_multiplicity_warning_on_repeated_eigenvalue():
    # the 4-point simplex has a triple eigenvalue -1/4
    with pytest.warns(MultiplicityWarning):
        eigendecompose(simplex(4))


def test_no_warning_for_plus_minus_pair(two_point):
    with warnings.catch_warnings():
        warnings.simplefilter("error", MultiplicityWarning)
        s = eigendecompose(two_point)
    assert s.ties == (0,)


def _check_spectrum(m, s):
    n = m.n
    km = build_operator(m)
    scale = np.abs(km.D).max()
    Q = np.diag(m.measure)
    assert np.abs(s.vectors.T @ Q @ s.vectors - np.eye(n)).max() <= 1e-9
    assert np.abs(km.D @ s.vectors - s.vectors * s.eigenvalues).max() <= 1e-9 * max(scale, 1)
    mag = np.abs(s.eigenvalues)
    assert np.all(np.diff(mag) <= 1e-10 * mag[0])
    assert abs(s.eigenvalues[0]) <= top_eigenvalue_bound(m) + 1e-12
    assert np.abs(np.linalg.norm(s.vectors, axis=1) - 1 / np.sqrt(m.measure)).max() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_spectra(seed):
    m = random_mms(np.random.default_rng(seed), nmax=50)
    _check_spectrum(m, eigendecompose(m))


def test_sign_convention_holds_where_defined(rng):
    m = random_mms(rng, n=30)
    s = eigendecompose(m)
    for i, rule in enumerate(s.sign_rule):
        if rule == "abs":
            assert np.sum(m.measure * s.vectors[:, i] * np.abs(s.vectors[:, i])) > 0


def test_lipschitz_eigenfunctions(rng):
    m = random_mms(rng, n=40)
    s = eigendecompose(m)
    le = s.vectors * s.eigenvalues
    gap = np.abs(le[:, None, :] - le[None, :, :]).max(axis=2)
    assert np.all(gap <= m.dist * np.sqrt(m.vol) + 1e-9)


def test_permutation_invariance(rng):
    m = random_mms(rng, n=25)
    perm = rng.permutation(m.n)
    a, b = eigendecompose(m), eigendecompose(m.permuted(perm))
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-10)
    assert np.allclose(a.vectors[perm], b.vectors, atol=1e-7)


def test_uniform_scaling_matches_empirical_operator():
    m = sample_sphere(30, seed=2)
    s = eigendecompose(m)
    direct = np.linalg.eigvals(m.dist / m.n)
    direct = direct[np.argsort(-np.abs(direct), kind="stable")].real
    assert np.allclose(np.sort(s.eigenvalues), np.sort(direct), atol=1e-10)


def test_json_round_trip_and_csv(tmp_path, rng):
    s = eigendecompose(random_mms(rng, n=6))
    back = spectrum_from_json(spectrum_to_json(s))
    assert np.array_equal(back.eigenvalues, s.eigenvalues)
    assert np.array_equal(back.vectors, s.vectors)
    assert back.sign_rule == s.sign_rule
    write_eigenvalues_csv(s, tmp_path / "e.csv", 3)
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) == 4
