"""Ideal boundary: limits of geodesic rays, geodesics between ideal points.

Ideal points are represented by an angle at the chart origin ``o``: the
class of rays asymptotic to the ray from ``o`` with that initial angle.
For rotationally symmetric models the coordinate rays through ``o`` are
geodesics and the angle of the limit point in the chart *is* that angle;
for other models the chart limit angle is mapped back through the
(monotone) chart-limit map of rays from ``o``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from ..errors import DegenerateEndpoints, NoConvergence, NoStabilization, StepFailure
from ..tolerances import DEFAULT, Tolerances
from .geodesic import GeodesicPath, _integrate, geodesic_line, geodesic_rhs, wrap_angle
from .models import HadamardModel

TWO_PI = 2.0 * math.pi
CUTOFF = 40.0
#: smallest usable chart margin 1 - r**2 before the conformal factor overflows
CHART_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class IdealPoint:
    """Point of the ideal boundary, as an angle in [0, 2 pi) at the basepoint."""

    angle: float
    tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)

    def __eq__(self, other):
        if not isinstance(other, IdealPoint):
            return NotImplemented
        return abs(wrap_angle(self.angle - other.angle)) <= max(self.tol, other.tol)

    __hash__ = None

    def distance(self, other: "IdealPoint") -> float:
        return float(abs(wrap_angle(self.angle - other.angle)))

    def __repr__(self) -> str:
        return f"IdealPoint({self.angle:.9f})"


def _as_angle(theta) -> float:
    return theta.angle if isinstance(theta, IdealPoint) else float(theta)


def _chart_limit_angle(model: HadamardModel, p, v, tol: Tolerances, cutoff: float) -> float:
    """Chart polar angle of ``lim gamma(s)`` by arc-length doubling.

    Integration proceeds segment by segment (1, 2, 4, ...); the next
    segment is skipped when the chart margin, extrapolated from the decay
    over the previous segment, would fall below :data:`CHART_FLOOR`.
    """
    rhs = geodesic_rhs(model)
    state = np.r_[np.asarray(p, float), np.asarray(v, float)]
    s_prev, s_next = 0.0, 1.0
    prev_angle = None
    prev_margin = float(model.chart_margin(state[0], state[1]))
    last_drift = math.inf
    while s_next <= cutoff + 1e-12:
        if model.domain == "disk" and prev_angle is not None:
            rate = margin / prev_margin if prev_margin > 0 else 0.0
            seg_ratio = (s_next - s_prev) / (s_prev - s_prev_prev)
            predicted = margin * rate**seg_ratio if rate < 1 else margin
            if predicted < CHART_FLOOR:
                break
            prev_margin = margin
        try:
            sol = _integrate(rhs, state, [s_prev, s_next], "ideal-point")
        except StepFailure:
            break
        new_state = sol[-1]
        if not model.in_chart(new_state[0], new_state[1]):
            break
        state = new_state
        margin = float(model.chart_margin(state[0], state[1]))
        angle = math.atan2(state[1], state[0])
        if prev_angle is not None:
            last_drift = abs(wrap_angle(angle - prev_angle))
            if last_drift < tol.ideal:
                return angle
        prev_angle = angle
        s_prev_prev, s_prev, s_next = s_prev, s_next, 2.0 * s_next
    raise NoStabilization(
        f"ideal point did not stabilise (last drift {last_drift:.2e} rad, cutoff {cutoff})")


def _basepoint_angle(model: HadamardModel, chart_angle: float, tol: Tolerances,
                     cutoff: float) -> float:
    """Initial angle at ``o`` of the ray whose chart limit angle is ``chart_angle``."""
    if model.radial_basepoint:
        return chart_angle
    o = np.zeros(2)

    def f(theta):
        lim = _chart_limit_angle(model, o, model.unit_vector(o, theta), tol, cutoff)
        return wrap_angle(lim - chart_angle)

    lo, hi = chart_angle - 1.0, chart_angle + 1.0
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0 or f_hi < 0:
        raise NoConvergence("basepoint angle: chart distortion larger than one radian")
    return brentq(f, lo, hi, xtol=1e-13, maxiter=tol.max_iter)


def _chart_angle_of(model: HadamardModel, theta: float, tol: Tolerances) -> float:
    """Chart limit angle of the ray from ``o`` with initial angle ``theta``."""
    if model.radial_basepoint:
        return theta
    o = np.zeros(2)
    return _chart_limit_angle(model, o, model.unit_vector(o, theta), tol, CUTOFF)


def ideal_point(model: HadamardModel, p, v, tol: Tolerances = DEFAULT,
                cutoff: float = CUTOFF) -> IdealPoint:
    """Ideal point of the geodesic ray from ``p`` with direction ``v``.

    ``v`` need not be unit: only its direction matters.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / model.norm(p, v)
    chart = _chart_limit_angle(model, p, v, tol, cutoff)
    return IdealPoint(_basepoint_angle(model, chart, tol, cutoff), tol.ideal)


def ideal_angle_from_direction(model: HadamardModel, p, psi: float,
                               tol: Tolerances = DEFAULT) -> float:
    return ideal_point(model, p, model.unit_vector(p, psi), tol).angle


# ---------------------------------------------------------------------------
# oriented geodesics


class Side(str, Enum):
    INTERIOR = "Interior"
    EXTERIOR = "Exterior"
    ON = "On"


class OrientedGeodesic:
    """Complete geodesic with ordered ideal endpoints.

    ``path`` is a finite two-sided sample table (arc length 0 at the
    anchor point); the geodesic itself is the complete extension.
    """

    def __init__(self, path: GeodesicPath, theta1: IdealPoint, theta2: IdealPoint):
        self.path = path
        self.theta1 = theta1
        self.theta2 = theta2
        self._tree = cKDTree(path.points)

    @property
    def model(self) -> HadamardModel:
        return self.path.model

    def reversed(self) -> "OrientedGeodesic":
        return OrientedGeodesic(self.path.reversed(), self.theta2, self.theta1)

    # -- projection ----------------------------------------------------------
    def project(self, pts, iterations: int = 4):
        """Closest trace parameter and signed chart offset for ``pts``.

        Returns ``(s, offset, at_end)`` where ``offset`` is the chart
        cross product of the unit chart tangent with ``pt - alpha(s)``
        (positive on the side ``J alpha'`` points to) and ``at_end`` flags
        points whose foot lies at an end of the finite trace.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        path = self.path
        _, idx = self._tree.query(pts)
        s = path.s[idx].astype(float)
        for _ in range(iterations):
            a = path.at(s)
            t = path.velocity_at(s)
            acc = _path_acc(path, s)
            w = pts - a
            g = np.einsum("ij,ij->i", w, t)
            dg = -np.einsum("ij,ij->i", t, t) + np.einsum("ij,ij->i", w, acc)
            step = np.where(np.abs(dg) > 0, -g / np.where(dg == 0, 1, dg), 0.0)
            s = np.clip(s + np.clip(step, -path.ds * 4, path.ds * 4), path.s_min, path.s_max)
        a = path.at(s)
        t = path.velocity_at(s)
        w = pts - a
        tn = t / np.linalg.norm(t, axis=1)[:, None]
        offset = tn[:, 0] * w[:, 1] - tn[:, 1] * w[:, 0]
        at_end = (s <= path.s_min + 1e-12) | (s >= path.s_max - 1e-12)
        return s, offset, at_end

    def signed_distance(self, pts):
        """First-order signed metric distance (exact zero set, exact sign)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        s, off, at_end = self.project(pts)
        foot = self.path.at(s)
        lam = self.model.lam(0.5 * (pts[:, 0] + foot[:, 0]), 0.5 * (pts[:, 1] + foot[:, 1]))
        return s, lam * off, at_end


def _path_acc(path: GeodesicPath, s):
    from .geodesic import acceleration

    return acceleration(path.model, path.at(s), path.velocity_at(s))


def _arc_contains(start: float, end: float, angle: float) -> bool:
    """Is ``angle`` on the counter-clockwise arc from ``start`` to ``end``?"""
    span = (end - start) % TWO_PI
    return 0.0 < (angle - start) % TWO_PI < span


def side_of(model: HadamardModel, alpha: OrientedGeodesic, p, tol: Tolerances = DEFAULT) -> Side:
    """Side of ``alpha`` containing ``p``.

    Exterior is the component towards which the counter-clockwise rotation
    of ``alpha'`` points.  Points within ``tol.geometric`` (metric) of the
    trace are reported ``On``.  Points whose foot falls beyond the finite
    trace are decided by the ideal boundary arc their direction from ``o``
    falls into (exterior = counter-clockwise arc from theta2 to theta1).
    """
    p = np.asarray(p, dtype=float)
    _, dist, at_end = alpha.signed_distance(p[None, :])
    if not at_end[0]:
        if abs(dist[0]) <= tol.geometric:
            return Side.ON
        return Side.EXTERIOR if dist[0] > 0 else Side.INTERIOR
    ang = math.atan2(p[1], p[0])
    ang = _basepoint_angle(model, ang, tol, CUTOFF) if not model.radial_basepoint else ang
    if _arc_contains(alpha.theta2.angle, alpha.theta1.angle, ang):
        return Side.EXTERIOR
    return Side.INTERIOR


# ---------------------------------------------------------------------------
# geodesic between two ideal points


def _trace_half_length(model: HadamardModel, z, reach: float) -> float:
    if model.radial_basepoint:
        d0 = float(model.distance_from_basepoint(z[0], z[1]))
    else:
        d0 = 0.0
    return reach + d0


def oriented_line(model: HadamardModel, z, psi: float, *, reach: float = 12.0,
                  ds: float = 0.02, tol: Tolerances = DEFAULT,
                  endpoints: tuple | None = None) -> OrientedGeodesic:
    """Oriented complete geodesic through ``z`` with chart direction ``psi``."""
    z = np.asarray(z, dtype=float)
    v = model.unit_vector(z, psi)
    half = _trace_half_length(model, z, reach)
    path = _safe_line(model, z, v, half, half, ds)
    if endpoints is None:
        back = ideal_point(model, z, -v, tol)
        fwd = ideal_point(model, z, v, tol)
    else:
        back, fwd = endpoints
    return OrientedGeodesic(path, back, fwd)


def _safe_line(model, z, v, back, fwd, ds):
    """Two-sided line, shortened until it stays representable in the chart."""
    for _ in range(12):
        try:
            path = geodesic_line(model, z, v, back, fwd, ds=ds)
            margin = model.chart_margin(path.points[:, 0], path.points[:, 1])
            if np.min(margin) > 1e3 * CHART_FLOOR:
                return path
        except StepFailure:
            pass
        back, fwd = 0.8 * back, 0.8 * fwd
    raise StepFailure("could not trace a representable geodesic line")


def ideal_geodesic(model: HadamardModel, theta1, theta2, tol: Tolerances = DEFAULT, *,
                   reach: float = 12.0, ds: float = 0.02) -> OrientedGeodesic:
    """Oriented geodesic from ideal point ``theta1`` to ``theta2``.

    Two-parameter shooting: the anchor point moves along the chart line
    through ``o`` in the mid-arc direction (coordinate ``r``) and the
    direction ``psi`` is free; Newton with finite-difference Jacobian
    solves (forward limit, backward limit) = (theta2, theta1), falling back
    to a nested bracketing solve.
    """
    a1, a2 = _as_angle(theta1), _as_angle(theta2)
    gap = abs(wrap_angle(a2 - a1))
    if gap < tol.angular:
        raise DegenerateEndpoints(f"ideal endpoints {a1:.6f} and {a2:.6f} coincide")
    # mid-arc direction of the shorter arc, orientation of travel
    d = wrap_angle(a2 - a1)
    m = a1 + 0.5 * d
    half = 0.5 * abs(d)
    ccw = d > 0
    r0 = (1.0 - math.sin(half)) / math.cos(half) if half < 0.5 * math.pi - 1e-12 else 0.0
    if model.domain == "plane":
        r0 = 0.0
    psi0 = m + (0.5 * math.pi if ccw else -0.5 * math.pi)
    e_m = np.array([math.cos(m), math.sin(m)])

    # targets as chart limit angles (identity on radial models)
    c1, c2 = _chart_angle_of(model, a1, tol), _chart_angle_of(model, a2, tol)

    def residual(r, psi):
        z = r * e_m
        v = model.unit_vector(z, psi)
        fwd = _chart_limit_angle(model, z, v, tol, CUTOFF)
        back = _chart_limit_angle(model, z, -v, tol, CUTOFF)
        return np.array([wrap_angle(fwd - c2), wrap_angle(back - c1)])

    target = 1e-10
    r, psi = r0, psi0
    ok = False
    used = 0
    try:
        res = residual(r, psi)
        for _ in range(30):
            used += 1
            if np.max(np.abs(res)) < target:
                ok = True
                break
            h = 1e-6
            jac = np.column_stack([(residual(r + h, psi) - res) / h,
                                   (residual(r, psi + h) - res) / h])
            step = np.linalg.solve(jac, -res)
            step[0] = float(np.clip(step[0], -0.2, 0.2))
            step[1] = float(np.clip(step[1], -0.3, 0.3))
            lam = 1.0
            for _ in range(10):
                r_n, psi_n = r + lam * step[0], psi + lam * step[1]
                if abs(r_n) < 1.0 or model.domain == "plane":
                    try:
                        res_n = residual(r_n, psi_n)
                        if np.max(np.abs(res_n)) < np.max(np.abs(res)):
                            break
                    except (NoStabilization, StepFailure):
                        pass
                lam *= 0.5
            else:
                break
            r, psi, res = r_n, psi_n, res_n
    except (NoStabilization, StepFailure, np.linalg.LinAlgError):
        ok = False
    if not ok:
        r, psi = _nested_solve(model, c1, c2, e_m, psi0, tol)
    z = r * e_m
    return oriented_line(model, z, psi, reach=reach, ds=ds, tol=tol,
                         endpoints=(IdealPoint(a1, tol.ideal), IdealPoint(a2, tol.ideal)))


def _nested_solve(model, a1, a2, e_m, psi0, tol):
    """Bracketing fallback: inner solve on psi, outer solve on r (chart limit angles)."""

    def limit(z, psi):
        return _chart_limit_angle(model, z, model.unit_vector(z, psi), tol, CUTOFF)

    def forward_psi(z):
        def g(psi):
            return wrap_angle(limit(z, psi) - a2)

        for width in (0.5, 1.0, 1.5, 2.5):
            lo, hi = psi0 - width, psi0 + width
            glo, ghi = g(lo), g(hi)
            if glo * ghi < 0 and max(abs(glo), abs(ghi)) < math.pi - 0.05:
                return brentq(g, lo, hi, xtol=1e-13, maxiter=tol.max_iter)
        raise NoConvergence("ideal geodesic: no direction bracket")

    def outer(r):
        z = r * e_m
        psi = forward_psi(z)
        back = limit(z, psi + math.pi)
        return wrap_angle(back - a1)

    edge = 1.0 - 1e-6 if model.domain == "disk" else 50.0
    grid = np.linspace(-edge, edge, 21)
    vals = []
    for r in grid:
        try:
            vals.append(outer(r))
        except (NoConvergence, NoStabilization, StepFailure):
            vals.append(np.nan)
    for i in range(len(grid) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0 \
                and abs(vals[i] - vals[i + 1]) < math.pi:
            r = brentq(outer, grid[i], grid[i + 1], xtol=1e-14, maxiter=tol.max_iter)
            return r, forward_psi(r * e_m)
    raise NoConvergence("ideal geodesic: no anchor bracket")
