"""Base curves: geodesic curvature, prescribed-curvature curves, hyperbolic circles."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import odeint

from ..base.geodesic import GeodesicPath, acceleration
from ..base.models import HadamardModel, PoincareDisk
from ..errors import NotUnitSpeed, StepFailure
from ..tolerances import DEFAULT, Tolerances

KG_STEP = 1e-3


def geodesic_curvature(model: HadamardModel, curve, s: float, tol: Tolerances = DEFAULT,
                       *, h: float = KG_STEP) -> float:
    """Signed geodesic curvature ``g(D_s a', J a')`` w.r.t. the counter-clockwise normal.

    ``curve`` needs ``at``, ``velocity_at`` and ``s_min``/``s_max``.  The
    covariant acceleration is the 5-point finite difference of the velocity
    minus the geodesic acceleration (one-sided near the ends).
    """
    p = np.asarray(curve.at(s), dtype=float)
    v = np.asarray(curve.velocity_at(s), dtype=float)
    speed = model.norm(p, v)
    if abs(speed - 1.0) > tol.geometric:
        raise NotUnitSpeed(f"|a'| = {speed:.9f} at s = {s}")
    lo, hi = curve.s_min, curve.s_max
    if s - 2 * h >= lo and s + 2 * h <= hi:
        vs = [np.asarray(curve.velocity_at(s + k * h)) for k in (-2, -1, 1, 2)]
        dv = (vs[0] - 8 * vs[1] + 8 * vs[2] - vs[3]) / (12 * h)
    else:
        sign = 1.0 if s - 2 * h < lo else -1.0
        vs = [np.asarray(curve.velocity_at(s + sign * k * h)) for k in range(5)]
        dv = sign * (-25 * vs[0] + 48 * vs[1] - 36 * vs[2] + 16 * vs[3] - 3 * vs[4]) / (12 * h)
    cov = dv - acceleration(model, p, v)
    n = np.array([-v[1], v[0]])
    return float(model.lam(p[0], p[1]) ** 2 * (cov @ n))


def curve_from_curvature(model: HadamardModel, p0, angle0: float, kg: Callable[[float], float],
                         length: float, *, ds: float = 0.005) -> GeodesicPath:
    """Unit-speed curve with prescribed geodesic curvature ``kg(s)`` (CCW normal)."""
    grad = model.grad_log_lam

    def rhs(state, s):
        x, y, u, v = state
        px, py = grad(x, y)
        q = u * u - v * v
        k = kg(s)  # the chart vector (-v, u) is the unit CCW normal of a unit-speed curve
        return [u, v, -px * q - 2 * py * u * v - k * v, py * q - 2 * px * u * v + k * u]

    p0 = np.asarray(p0, dtype=float)
    v0 = model.unit_vector(p0, angle0)
    n = max(int(math.ceil(length / ds)), 4) + 1
    s = np.linspace(0.0, length, n)
    sol, info = odeint(rhs, np.r_[p0, v0], s, rtol=1e-12, atol=1e-14, full_output=True)
    if info["message"] != "Integration successful." or not np.all(np.isfinite(sol)):
        raise StepFailure("prescribed-curvature curve integration failed")
    pts, vel = sol[:, :2], sol[:, 2:]
    kk = np.array([kg(si) for si in s])
    acc = acceleration(model, pts, vel) + kk[:, None] * np.column_stack([-vel[:, 1], vel[:, 0]])
    return GeodesicPath(model, s, pts, vel, acc)


def hyperbolic_circle(model: PoincareDisk, radius: float, *, n: int = 2001) -> GeodesicPath:
    """Counter-clockwise circle of metric radius ``radius`` about the origin (closed form)."""
    a = model.a
    rho = math.tanh(a * radius / 2.0)
    L = 2.0 * math.pi * math.sinh(a * radius) / a
    w = 2.0 * math.pi / L
    s = np.linspace(0.0, L, n)
    c, sn = np.cos(w * s), np.sin(w * s)
    pts = rho * np.column_stack([c, sn])
    vel = rho * w * np.column_stack([-sn, c])
    acc = -rho * w * w * np.column_stack([c, sn])
    return GeodesicPath(model, s, pts, vel, acc)


def random_curvature_profile(rng: np.random.Generator, scale: float = 1.0):
    """Smooth random ``kg(s) = c0 + c1 sin(w s + phi)``; returns (callable, params)."""
    c0, c1 = rng.uniform(-scale, scale, 2)
    w, phi = rng.uniform(0.5, 3.0), rng.uniform(0, 2 * math.pi)

    def kg(s):
        return c0 + c1 * math.sin(w * s + phi)

    return kg, (c0, c1, w, phi)
