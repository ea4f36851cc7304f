"""Planar curve and frame math shared by action decoding, rewards and metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

# Below this tangent magnitude the curvature denominator is treated as
# degenerate and the curvature reported as 0.
EPS_TANGENT = 1e-9


class Pose2D(NamedTuple):
    x: float
    y: float
    alpha: float


class LocalPoint(NamedTuple):
    """Point in the robot frame: l forward-positive, h left-positive (meters)."""

    l: float
    h: float


class CurveKind(enum.Enum):
    CUBIC_BEZIER = "bezier"
    CUBIC_SPLINE = "cspline"


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = float(np.remainder(a + np.pi, 2.0 * np.pi) - np.pi)
    if r == -np.pi:
        r = np.pi
    return r


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape != (4, 2):
        raise ValueError(f"expected 4 control points of shape (4, 2), got {pts.shape}")
    return pts


def _check_x(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"curve parameter must be in [0, 1], got {x}")
    return x


def bezier_eval(points, x: float) -> LocalPoint:
    """Evaluate the cubic Bezier at parameter x in [0, 1] (Bernstein form)."""
    pts = _as_points(points)
    x = _check_x(x)
    p = _bezier_points(pts, np.array([x]))[0]
    return LocalPoint(float(p[0]), float(p[1]))


def _bezier_points(pts: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Vectorized cubic Bezier evaluation, xs shape (M,) -> (M, 2)."""
    u = 1.0 - xs
    b = np.stack([u**3, 3.0 * u**2 * xs, 3.0 * u * xs**2, xs**3], axis=1)
    return b @ pts


def _bezier_first(pts: np.ndarray, xs: np.ndarray) -> np.ndarray:
    d1 = 3.0 * np.diff(pts, axis=0)  # quadratic control points of B'
    u = 1.0 - xs
    b = np.stack([u**2, 2.0 * u * xs, xs**2], axis=1)
    return b @ d1


def _bezier_second(pts: np.ndarray, xs: np.ndarray) -> np.ndarray:
    d2 = 6.0 * (pts[2:] - 2.0 * pts[1:3] + pts[:2])  # linear control points of B''
    u = 1.0 - xs
    b = np.stack([u, xs], axis=1)
    return b @ d2


def bezier_derivatives(points, x: float) -> tuple[LocalPoint, LocalPoint]:
    """First and second parametric derivatives of the cubic at x."""
    pts = _as_points(points)
    x = _check_x(x)
    xs = np.array([x])
    d1 = _bezier_first(pts, xs)[0]
    d2 = _bezier_second(pts, xs)[0]
    return LocalPoint(float(d1[0]), float(d1[1])), LocalPoint(float(d2[0]), float(d2[1]))


def _curvature_from_derivs(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Planar curvature |d1 x d2| / |d1|^3 with the degenerate tangent clamped to 0."""
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    speed = np.hypot(d1[:, 0], d1[:, 1])
    k = np.zeros_like(speed)
    ok = speed >= EPS_TANGENT
    k[ok] = np.abs(cross[ok]) / speed[ok] ** 3
    return k


def curvature_at(points, x: float) -> float:
    """Curvature of the cubic Bezier at parameter x (1/m)."""
    pts = _as_points(points)
    x = _check_x(x)
    xs = np.array([x])
    return float(_curvature_from_derivs(_bezier_first(pts, xs), _bezier_second(pts, xs))[0])


def total_curvature(points, n: int) -> float:
    """Sum of curvature over the n+1 uniform parameter samples i/n, i = 0..n."""
    pts = _as_points(points)
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    return float(np.sum(_curvature_from_derivs(_bezier_first(pts, xs), _bezier_second(pts, xs))))


def arc_length(points, n: int) -> float:
    """Polyline length of the cubic Bezier over n+1 uniform samples (meters)."""
    pts = _as_points(points)
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    samples = _bezier_points(pts, np.linspace(0.0, 1.0, n + 1))
    return float(np.sum(np.hypot(*np.diff(samples, axis=0).T)))


def polyline_length(samples: np.ndarray) -> float:
    """Length of an arbitrary (M, 2) polyline."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(samples, axis=0).T)))


def local_to_global(origin: Pose2D, p: LocalPoint | tuple[float, float]) -> tuple[float, float]:
    """Map a point from the frame anchored at ``origin`` into world coordinates."""
    l, h = p
    c, s = np.cos(origin.alpha), np.sin(origin.alpha)
    return (l * c - h * s + origin.x, l * s + h * c + origin.y)


def local_to_global_many(origin: Pose2D, pts: np.ndarray) -> np.ndarray:
    """Vectorized local_to_global for an (M, 2) array of local points."""
    pts = np.asarray(pts, dtype=float)
    c, s = np.cos(origin.alpha), np.sin(origin.alpha)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T + np.array([origin.x, origin.y])


def global_to_local(origin: Pose2D, xy: tuple[float, float]) -> tuple[float, float]:
    """Inverse of local_to_global for a single world point."""
    dx, dy = xy[0] - origin.x, xy[1] - origin.y
    c, s = np.cos(origin.alpha), np.sin(origin.alpha)
    return (dx * c + dy * s, -dx * s + dy * c)


@dataclass(frozen=True)
class Curve:
    """A sampled local-frame curve through 4 anchors starting at (0, 0).

    ``samples`` holds n+1 points in the local frame, ``curvature`` the
    per-sample curvature and ``length`` the polyline length.
    """

    kind: CurveKind
    points: np.ndarray          # (4, 2) anchors, points[0] == (0, 0)
    samples: np.ndarray         # (n+1, 2)
    curvature: np.ndarray       # (n+1,)
    length: float

    def __post_init__(self):
        if self.points[0, 0] != 0.0 or self.points[0, 1] != 0.0:
            raise ValueError("curve must start at the local origin (0, 0)")
        spacing = np.diff(self.points[:, 0])
        if np.any(spacing <= 0.0):
            raise ValueError("anchor longitudinal coordinates must be strictly increasing")
        if np.max(np.abs(spacing - spacing[0])) > 1e-9:
            raise ValueError("anchor longitudinal spacing must be uniform")


def bezier_curve(points, n_samples: int = 100) -> Curve:
    """Build a sampled cubic Bezier Curve from 4 local anchors."""
    pts = _as_points(points)
    xs = np.linspace(0.0, 1.0, n_samples + 1)
    samples = _bezier_points(pts, xs)
    k = _curvature_from_derivs(_bezier_first(pts, xs), _bezier_second(pts, xs))
    return Curve(CurveKind.CUBIC_BEZIER, pts, samples, k, polyline_length(samples))


def cubic_spline_fit(points, n_samples: int = 100) -> Curve:
    """Natural cubic spline h(l) through 4 local anchors, sampled like the Bezier."""
    from scipy.interpolate import CubicSpline

    pts = _as_points(points)
    if np.any(np.diff(pts[:, 0]) <= 0.0):
        raise ValueError("spline anchors must have strictly increasing l")
    spline = CubicSpline(pts[:, 0], pts[:, 1], bc_type="natural")
    ls = np.linspace(pts[0, 0], pts[-1, 0], n_samples + 1)
    hs = spline(ls)
    samples = np.column_stack([ls, hs])
    # graph curvature: |h''| / (1 + h'^2)^(3/2)
    h1 = spline(ls, 1)
    h2 = spline(ls, 2)
    k = np.abs(h2) / (1.0 + h1**2) ** 1.5
    return Curve(CurveKind.CUBIC_SPLINE, pts, samples, k, polyline_length(samples))


def spline_eval(curve: Curve, l: float) -> float:
    """Evaluate the fitted spline's h at longitudinal coordinate l."""
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(curve.points[:, 0], curve.points[:, 1], bc_type="natural")
    return float(spline(l))


def dtw_distance(a: Sequence | np.ndarray, b: Sequence | np.ndarray) -> float:
    """Dynamic-time-warping distance between two point sequences (Euclidean cost)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or len(a) == 0 or len(b) == 0:
        raise ValueError("dtw_distance needs two nonempty (M, 2) point sequences")
    n, m = len(a), len(b)
    # pairwise Euclidean costs, then the classic O(n*m) recurrence
    cost = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    cur = np.empty(m + 1)
    for i in range(n):
        # entering row i at column k and moving right to j costs
        # min(prev[k-1], prev[k]) + sum(cost[i, k-1:j]); the min over k is a
        # cumulative-min scan, which keeps each row fully vectorized
        c = cost[i]
        s = np.cumsum(c)
        s_before = np.concatenate(([0.0], s[:-1]))
        enter = np.minimum(prev[:-1], prev[1:])
        cur[0] = np.inf
        cur[1:] = s + np.minimum.accumulate(enter - s_before)
        prev, cur = cur, prev
    return float(prev[m])
