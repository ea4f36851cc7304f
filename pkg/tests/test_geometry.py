import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathnav import geometry as geo
from pathnav.geometry import LocalPoint, Pose2D

D = 0.4 / 3.0


def anchors(h1, h2, h3):
    return np.array([[0.0, 0.0], [D, h1], [2 * D, h2], [3 * D, h3]])


def random_points(rng, scale=0.5):
    pts = rng.uniform(-scale, scale, size=(4, 2))
    pts[:, 0] = np.sort(rng.uniform(0.05, scale, size=4))
    pts[0] = 0.0
    return pts


# -- independent oracles -----------------------------------------------------

def de_casteljau(pts, x):
    """Repeated linear interpolation, independent of the Bernstein form."""
    level = [np.asarray(p, dtype=float) for p in pts]
    while len(level) > 1:
        level = [(1.0 - x) * a + x * b for a, b in zip(level[:-1], level[1:])]
    return level[0]


def fd_derivatives(pts, x, step=1e-5):
    lo = max(x - step, 0.0)
    hi = min(x + step, 1.0)
    f_lo = de_casteljau(pts, lo)
    f_hi = de_casteljau(pts, hi)
    f_mid = de_casteljau(pts, x)
    first = (f_hi - f_lo) / (hi - lo)
    second = (f_hi - 2.0 * f_mid + f_lo) / step**2
    return first, second


def circle_curvature(p0, p1, p2):
    """Curvature of the circle through three points: 4*area / (|a||b||c|)."""
    a = np.linalg.norm(p1 - p0)
    b = np.linalg.norm(p2 - p1)
    c = np.linalg.norm(p2 - p0)
    area2 = abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))
    if a * b * c == 0.0:
        return 0.0
    return 2.0 * area2 / (a * b * c)


def dtw_brute_force(a, b):
    """Minimum cost over every monotone alignment, by explicit enumeration."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def cost(i, j):
        return float(np.linalg.norm(a[i] - b[j]))

    best = [np.inf]

    def walk(i, j, acc):
        acc += cost(i, j)
        if i == len(a) - 1 and j == len(b) - 1:
            best[0] = min(best[0], acc)
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < len(a) and j + dj < len(b):
                walk(i + di, j + dj, acc)

    walk(0, 0, 0.0)
    return best[0]


# -- bezier_eval -------------------------------------------------------------

def test_eval_collinear_midpoint():
    pts = anchors(0.0, 0.0, 0.0)
    assert geo.bezier_eval(pts, 0.5) == pytest.approx((0.2, 0.0), abs=1e-12)


def test_eval_endpoints_exact():
    pts = anchors(0.1, -0.2, 0.3)
    assert geo.bezier_eval(pts, 0.0) == pytest.approx(tuple(pts[0]), abs=0)
    assert geo.bezier_eval(pts, 1.0) == pytest.approx(tuple(pts[3]), abs=0)


def test_eval_matches_de_casteljau():
    pts = np.array([[0.0, 0.0], [0.1333, 0.1], [0.2667, 0.1], [0.4, 0.0]])
    expect = de_casteljau(pts, 0.5)
    assert geo.bezier_eval(pts, 0.5) == pytest.approx(tuple(expect), rel=1e-12)


def test_eval_matches_de_casteljau_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pts = random_points(rng)
        x = rng.uniform(0.0, 1.0)
        assert geo.bezier_eval(pts, x) == pytest.approx(tuple(de_casteljau(pts, x)), abs=1e-13)


def test_eval_rejects_out_of_range():
    pts = anchors(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        geo.bezier_eval(pts, -0.01)
    with pytest.raises(ValueError):
        geo.bezier_eval(pts, 1.01)


# -- bezier_derivatives ------------------------------------------------------

def test_derivative_endpoint_tangent():
    pts = anchors(0.2, 0.1, -0.1)
    first, _ = geo.bezier_derivatives(pts, 0.0)
    assert np.allclose(first, 3.0 * (pts[1] - pts[0]))


def test_derivative_collinear_directions():
    pts = anchors(0.0, 0.0, 0.0)
    for x in (0.0, 0.3, 0.9):
        first, second = geo.bezier_derivatives(pts, x)
        assert first.h == pytest.approx(0.0, abs=1e-15)
        assert second.h == pytest.approx(0.0, abs=1e-15)
        assert first.l > 0.0


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        pts = random_points(rng)
        x = rng.uniform(0.01, 0.99)
        first, second = geo.bezier_derivatives(pts, x)
        fd1, fd2 = fd_derivatives(pts, x)
        assert np.allclose(first, fd1, rtol=1e-6, atol=1e-8)
        assert np.allclose(second, fd2, rtol=1e-4, atol=1e-5)


# -- curvature ---------------------------------------------------------------

def test_curvature_straight_is_zero():
    pts = anchors(0.0, 0.0, 0.0)
    for x in np.linspace(0.0, 1.0, 11):
        assert geo.curvature_at(pts, x) == 0.0


def test_curvature_degree_elevated_quadratic():
    # quadratic P0=(0,0), P1=(1,0), P2=(1,1) elevated to a cubic; k(0) = 0.5
    p0, p1, p2 = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([1.0, 1.0])
    cubic = np.array([p0, (p0 + 2 * p1) / 3, (2 * p1 + p2) / 3, p2])
    assert geo.curvature_at(cubic, 0.0) == pytest.approx(0.5, rel=1e-12)
    # cross-check with the finite-difference curvature at a nearby point
    d1, d2 = fd_derivatives(cubic, 1e-4)
    k_fd = abs(d1[0] * d2[1] - d1[1] * d2[0]) / np.linalg.norm(d1) ** 3
    assert geo.curvature_at(cubic, 1e-4) == pytest.approx(k_fd, rel=1e-5)


def test_curvature_matches_circle_fit():
    rng = np.random.default_rng(3)
    for _ in range(300):
        pts = random_points(rng)
        x = rng.uniform(0.05, 0.95)
        k = geo.curvature_at(pts, x)
        delta = 1e-3
        p0 = de_casteljau(pts, x - delta)
        p1 = de_casteljau(pts, x)
        p2 = de_casteljau(pts, x + delta)
        k_circle = circle_curvature(p0, p1, p2)
        assert k == pytest.approx(k_circle, rel=1e-3, abs=1e-6)


def test_curvature_rotation_invariant():
    rng = np.random.default_rng(4)
    pts = random_points(rng)
    for _ in range(50):
        phi = rng.uniform(-np.pi, np.pi)
        c, s = np.cos(phi), np.sin(phi)
        rot = pts @ np.array([[c, s], [-s, c]])
        x = rng.uniform(0.0, 1.0)
        assert geo.curvature_at(rot, x) == pytest.approx(geo.curvature_at(pts, x), rel=1e-9)


def test_curvature_degenerate_tangent_is_zero():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    assert geo.curvature_at(pts, 0.5) == 0.0


# -- total_curvature ---------------------------------------------------------

def test_total_curvature_straight():
    assert geo.total_curvature(anchors(0.0, 0.0, 0.0), 100) == 0.0


def test_total_curvature_independent_summation():
    # hodograph route: derivative control points evaluated with de Casteljau
    pts = anchors(0.1, -0.05, 0.12)
    d1_pts = 3.0 * np.diff(pts, axis=0)
    d2_pts = 2.0 * np.diff(d1_pts, axis=0)
    total = 0.0
    for i in range(101):
        d1 = de_casteljau(d1_pts, i / 100)
        d2 = de_casteljau(d2_pts, i / 100)
        total += abs(d1[0] * d2[1] - d1[1] * d2[0]) / np.linalg.norm(d1) ** 3
    assert geo.total_curvature(pts, 100) == pytest.approx(total, rel=1e-9)


def test_total_curvature_scale_covariance():
    pts = anchors(0.07, -0.1, 0.2)
    assert geo.total_curvature(2.0 * pts, 100) == pytest.approx(
        0.5 * geo.total_curvature(pts, 100), rel=1e-9
    )


def test_total_curvature_rejects_zero_samples():
    with pytest.raises(ValueError):
        geo.total_curvature(anchors(0.0, 0.0, 0.0), 0)


# -- arc_length --------------------------------------------------------------

def test_arc_length_straight():
    assert geo.arc_length(anchors(0.0, 0.0, 0.0), 100) == pytest.approx(0.4, abs=1e-12)


def test_arc_length_lower_bound():
    rng = np.random.default_rng(5)
    for _ in range(100):
        h = rng.uniform(-0.4, 0.4, size=3)
        assert geo.arc_length(anchors(*h), 100) >= 0.4 - 1e-9


def test_arc_length_monotone_in_samples():
    pts = anchors(0.2, -0.3, 0.1)
    for n in (1, 2, 5, 10, 50):
        assert geo.arc_length(pts, 2 * n) >= geo.arc_length(pts, n) - 1e-15


def test_arc_length_matches_quadrature():
    from scipy.integrate import quad

    pts = anchors(0.2, 0.0, -0.2)
    speed = lambda x: float(np.linalg.norm(geo.bezier_derivatives(pts, x)[0]))
    expect, _ = quad(speed, 0.0, 1.0, limit=200)
    assert geo.arc_length(pts, 100) == pytest.approx(expect, rel=1e-4)


# -- frames ------------------------------------------------------------------

def test_local_to_global_identity():
    assert geo.local_to_global(Pose2D(0, 0, 0), LocalPoint(0.4, 0.1)) == pytest.approx((0.4, 0.1))


def test_local_to_global_quarter_turn():
    x, y = geo.local_to_global(Pose2D(0, 0, np.pi / 2), LocalPoint(1.0, 0.0))
    assert (x, y) == pytest.approx((0.0, 1.0), abs=1e-12)


def test_local_global_round_trip():
    origin = Pose2D(2.0, -1.0, 0.3)
    p = (0.2667, -0.05)
    assert geo.global_to_local(origin, geo.local_to_global(origin, p)) == pytest.approx(p, abs=1e-12)


def test_local_to_global_many_matches_scalar():
    origin = Pose2D(1.0, 2.0, -0.7)
    pts = np.random.default_rng(6).uniform(-1, 1, size=(10, 2))
    out = geo.local_to_global_many(origin, pts)
    for p, o in zip(pts, out):
        assert geo.local_to_global(origin, tuple(p)) == pytest.approx(tuple(o), abs=1e-12)


# -- curves ------------------------------------------------------------------

def test_bezier_curve_invariants():
    c = geo.bezier_curve(anchors(0.1, 0.2, 0.1))
    assert c.points[0, 0] == 0.0 and c.points[0, 1] == 0.0
    assert c.samples.shape == (101, 2)
    assert c.length >= 0.4 - 1e-9


def test_curve_rejects_offset_origin():
    pts = anchors(0.1, 0.2, 0.1)
    pts[0] = (0.01, 0.0)
    with pytest.raises(ValueError):
        geo.bezier_curve(pts)


def test_curve_rejects_nonuniform_spacing():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.3, 0.0], [0.4, 0.0]])
    with pytest.raises(ValueError):
        geo.bezier_curve(pts)


def test_spline_collinear_is_straight():
    c = geo.cubic_spline_fit(anchors(0.0, 0.0, 0.0))
    assert np.allclose(c.curvature, 0.0, atol=1e-9)
    assert c.length == pytest.approx(0.4, abs=1e-9)


def test_spline_interpolates_anchors():
    pts = anchors(0.1, -0.2, 0.15)
    for l, h in pts:
        assert geo.spline_eval(geo.cubic_spline_fit(pts), l) == pytest.approx(h, abs=1e-12)


def test_spline_natural_boundary():
    c = geo.cubic_spline_fit(anchors(0.0, 0.1, 0.1))

    # h'' is piecewise linear and h is piecewise cubic, so the central second
    # difference is exact per segment; extrapolate two interior estimates to
    # the endpoint
    def second(l, delta=1e-3):
        return (geo.spline_eval(c, l - delta) - 2 * geo.spline_eval(c, l)
                + geo.spline_eval(c, l + delta)) / delta**2

    delta = 1e-3
    at_start = 2.0 * second(delta) - second(2 * delta)
    at_end = 2.0 * second(0.4 - delta) - second(0.4 - 2 * delta)
    assert at_start == pytest.approx(0.0, abs=1e-9)
    assert at_end == pytest.approx(0.0, abs=1e-9)


def test_spline_rejects_non_increasing():
    pts = np.array([[0.0, 0.0], [0.2, 0.0], [0.1, 0.0], [0.4, 0.0]])
    with pytest.raises(ValueError):
        geo.cubic_spline_fit(pts)


# -- dtw ---------------------------------------------------------------------

def test_dtw_identical_sequences():
    a = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]])
    assert geo.dtw_distance(a, a) == 0.0


def test_dtw_single_pair():
    assert geo.dtw_distance([(0.0, 0.0)], [(3.0, 4.0)]) == pytest.approx(5.0)


def test_dtw_matches_brute_force_small():
    a = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]])
    b = np.array([[0.0, 0.5], [2.0, 0.5]])
    assert geo.dtw_distance(a, b) == pytest.approx(dtw_brute_force(a, b), rel=1e-12)


def test_dtw_matches_brute_force_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = rng.uniform(-2, 2, size=(rng.integers(1, 7), 2))
        b = rng.uniform(-2, 2, size=(rng.integers(1, 7), 2))
        assert geo.dtw_distance(a, b) == pytest.approx(dtw_brute_force(a, b), rel=1e-12)


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        geo.dtw_distance(np.empty((0, 2)), np.array([[1.0, 1.0]]))


@given(
    st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=8),
    st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=8),
)
def test_dtw_symmetric(a, b):
    a = np.array(a)
    b = np.array(b)
    assert geo.dtw_distance(a, b) == pytest.approx(geo.dtw_distance(b, a), rel=1e-9, abs=1e-12)
    assert geo.dtw_distance(a, a) == pytest.approx(0.0, abs=1e-12)


def test_wrap_angle_range():
    for a in np.linspace(-10, 10, 201):
        w = geo.wrap_angle(a)
        assert -np.pi < w <= np.pi
        assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-12)
        assert np.sin(w) == pytest.approx(np.sin(a), abs=1e-12)
