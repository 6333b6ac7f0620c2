import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from dke.errors import MetricError
from dke.mmspace import (
    AbStandardness,
    ball_volumes,
    cross_distance,
    estimate_ab,
    lens_distance,
    lens_generator,
    make_mms,
    read_csv,
    read_json,
    sample_lens,
    sample_sphere,
    sample_torus,
    validate_metric,
    write_csv,
    write_json,
)


def test_two_point_space():
    m = make_mms([[0, 1], [1, 0]], [1, 4])
    assert m.n == 2 and m.vol == 5 and m.diam == 1


def test_one_point_space():
    m = make_mms([[0]], [1])
    assert m.n == 1 and m.diam == 0 and m.vol == 1


def test_default_measure_is_uniform_probability():
    m = make_mms(np.ones((3, 3)) - np.eye(3))
    assert np.allclose(m.measure, 1 / 3)


def test_triangle_violation_rejected():
    d = np.array([[0, 3, 1], [3, 0, 1], [1, 1, 0]], dtype=float)
    with pytest.raises(MetricError) as info:
        make_mms(d, [1, 1, 1])
    kinds = {v.kind for v in info.value.violations}
    assert kinds == {"triangle"}
    assert any(set(v.indices[:2]) == {0, 1} for v in info.value.violations)


@pytest.mark.parametrize(
    "dist, measure, kind",
    [
        ([[0, 1], [2, 0]], [1, 1], "asymmetry"),
        ([[0, -1], [-1, 0]], [1, 1], "negative"),
        ([[1, 1], [1, 0]], [1, 1], "diagonal"),
        ([[0, 1], [1, 0]], [1, 0], "measure"),
        ([[0, 1], [1, 0]], [1, -2], "measure"),
    ],
)
def test_each_violation_is_named(dist, measure, kind):
    with pytest.raises(MetricError) as info:
        make_mms(dist, measure)
    assert kind in {v.kind for v in info.value.violations}


def test_shape_errors():
    with pytest.raises(MetricError):
        make_mms(np.zeros((2, 3)), [1, 1])
    with pytest.raises(MetricError):
        make_mms(np.zeros((2, 2)), [1, 1, 1])
    with pytest.raises(MetricError):
        make_mms(np.zeros((0, 0)))


def test_validate_metric_reports():
    d = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    assert validate_metric(d, [1, 1, 1]) == []
    bad = d.copy()
    bad[0, 1] = 1.5
    assert "asymmetry" in {v.kind for v in validate_metric(bad)}
    tri = np.array([[0, 3, 1], [3, 0, 1], [1, 1, 0]], dtype=float)
    assert "triangle" in {v.kind for v in validate_metric(tri)}


def test_triangle_tolerance_is_relative_to_diameter():
    d = np.array([[0, 2 + 1e-10, 1], [2 + 1e-10, 0, 1], [1, 1, 0]]) * 1e6
    make_mms(d)


@pytest.mark.parametrize("metric, top", [("geodesic", math.pi), ("chordal", 2.0)])
@pytest.mark.parametrize("dim", [2, 3])
def test_sphere_distance_range(metric, top, dim):
    m = sample_sphere(200, dim, metric, seed=3)
    assert m.dist.min() >= 0 and m.dist.max() <= top + 1e-12
    assert validate_metric(m, check_triangle=True) == []
    assert abs(m.vol - 1) <= 1e-12


def test_sphere_geodesic_is_arc_of_chord():
    g = sample_sphere(50, 2, "geodesic", seed=1)
    c = sample_sphere(50, 2, "chordal", seed=1)
    assert np.allclose(g.dist, 2 * np.arcsin(np.clip(c.dist / 2, 0, 1)), atol=1e-12)
    P = g.points
    assert np.allclose(g.dist, np.arccos(np.clip(P @ P.T, -1, 1)), atol=1e-6)


@pytest.mark.parametrize(
    "make",
    [
        lambda s: sample_sphere(5, 2, "geodesic", seed=s),
        lambda s: sample_sphere(5, 3, "chordal", seed=s),
        lambda s: sample_torus(5, seed=s),
        lambda s: sample_lens(5, 7, 2, seed=s),
    ],
)
def test_sampler_determinism(make):
    a, b = make(11), make(11)
    assert a.dist.tobytes() == b.dist.tobytes()
    assert a.measure.tobytes() == b.measure.tobytes()
    assert make(12).dist.tobytes() != a.dist.tobytes()


def test_torus_diameter_bound_and_limit():
    small = sample_torus(300, R=2.5, r=1.0, seed=0)
    assert small.diam <= 2 * (2.5 + 1.0)
    assert validate_metric(small, check_triangle=True) == []
    # a dense grid on the R=2, r=1 torus has diameter exactly 6 (opposite outer equator points)
    th, ph = np.meshgrid(np.linspace(0, 2 * np.pi, 60, endpoint=False), np.linspace(0, 2 * np.pi, 60, endpoint=False))
    grid = np.c_[((2 + np.cos(th)) * np.cos(ph)).ravel(), ((2 + np.cos(th)) * np.sin(ph)).ravel(), np.sin(th).ravel()]
    assert abs(cdist(grid, grid).max() - 6.0) < 1e-9
    big = sample_torus(2000, R=2.0, r=1.0, seed=0)
    assert 5.95 < big.diam <= 6.0


def test_torus_area_weighting():
    # outer half (cos theta > 0) carries (pi R + 2 r) / (2 pi R) of the area
    m = sample_torus(4000, R=2.0, r=1.0, seed=5)
    P = m.points
    rho = np.hypot(P[:, 0], P[:, 1])
    frac = float(np.mean(rho > 2.0))
    assert abs(frac - (np.pi * 2 + 2) / (2 * np.pi * 2)) < 0.03


def test_torus_rejects_bad_radii():
    with pytest.raises(ValueError):
        sample_torus(10, R=1.0, r=1.0)


def test_lens_trivial_quotient_is_three_sphere():
    L = sample_lens(60, 1, 0, seed=4)
    S = sample_sphere(60, 3, "geodesic", seed=4)
    assert np.allclose(L.dist, S.dist, atol=1e-12, rtol=0)


def test_lens_range_symmetry_and_orbits():
    L = sample_lens(80, 7, 3, seed=2)
    assert L.dist.min() >= 0 and L.dist.max() <= math.pi
    assert np.array_equal(L.dist, L.dist.T)
    assert validate_metric(L, check_triangle=True) == []
    P = L.points[:5]
    g = lens_generator(7, 3)
    gP = P @ g.T
    D = lens_distance(P, gP, 7, 3)
    assert np.allclose(np.diag(D), 0, atol=1e-7)


def test_lens_rejects_non_coprime():
    with pytest.raises(ValueError):
        sample_lens(10, 6, 3)


def test_cross_distance_matches_within_sample():
    X = sample_sphere(40, 2, seed=0)
    assert np.allclose(cross_distance(X, X), X.dist, atol=1e-7)
    with pytest.raises(ValueError):
        cross_distance(X, sample_torus(40))


def test_estimate_ab_single_point():
    m = make_mms([[0]], [2.5])
    ab = estimate_ab(m, [0.5, 1.0, 2.0])
    assert math.isclose(ab.a, 2.5) and ab.b < 1e-9


def test_estimate_ab_equidistant():
    n, delta = 6, 2.0
    m = make_mms(delta * (np.ones((n, n)) - np.eye(n)))
    radii = [0.1, 0.5, 1.0, 1.9]
    assert np.allclose(ball_volumes(m, radii), 1 / n)
    ab = estimate_ab(m, radii)
    assert ab.b < 1e-9 and math.isclose(ab.a, 1 / n, rel_tol=1e-9)
    assert ab.r == 1.9


def test_estimate_ab_circle_dimension():
    # evenly spaced, so ball counts are exact and the fitted exponent is not skewed by the min over centres
    t = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    P = np.c_[np.cos(t), np.sin(t)]
    m = make_mms(cdist(P, P), check_triangle=False)
    ab = estimate_ab(m, np.geomspace(0.05, 0.3, 6))
    assert abs(ab.b - 1) <= 0.2


def test_estimate_ab_conservative_is_certificate():
    m = sample_torus(300, seed=1)
    radii = np.geomspace(m.diam / 50, m.diam / 5, 8)
    ab = estimate_ab(m, radii, conservative=True)
    assert np.all(ball_volumes(m, radii) >= ab.a * radii**ab.b * (1 - 1e-12))


def test_estimate_ab_rejects_bad_radii():
    m = sample_sphere(20, seed=0)
    with pytest.raises(ValueError):
        estimate_ab(m, [0.2, 0.1])
    with pytest.raises(ValueError):
        estimate_ab(m, [10.0])
    with pytest.raises(ValueError):
        AbStandardness(0.0, 1.0, 1.0)


def test_io_round_trip(tmp_path):
    m = sample_torus(30, seed=7)
    write_csv(m, tmp_path / "t.csv")
    back = read_csv(tmp_path / "t.csv")
    assert back.dist.tobytes() == m.dist.tobytes() and back.measure.tobytes() == m.measure.tobytes()
    assert (tmp_path / "t.csv").read_text().startswith("# dke-mms v1 n=30\n")
    write_json(m, tmp_path / "t.json")
    back = read_json(tmp_path / "t.json")
    assert back.dist.tobytes() == m.dist.tobytes()


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0,1\n1,0\n1,1\n")
    with pytest.raises(MetricError):
        read_csv(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_euclidean_clouds_are_valid(n, seed):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((n, 3))
    m = make_mms(cdist(P, P), rng.uniform(0.1, 1, n))
    assert validate_metric(m, check_triangle=True) == []
    perm = rng.permutation(n)
    q = m.permuted(perm)
    assert np.array_equal(q.dist, m.dist[np.ix_(perm, perm)])
