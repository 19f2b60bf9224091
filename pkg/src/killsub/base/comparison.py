"""Comparison triangles and nearest points on geodesics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NoConvergence
from ..tolerances import DEFAULT, Tolerances
from .geodesic import GeodesicPath, shoot, wrap_angle
from .models import HadamardModel


@dataclass(frozen=True)
class TriangleReport:
    """Sides ``a, b, c`` opposite the angles ``alpha, beta, gamma`` at ``p, q, r``.

    Side ``a = d(q, r)``, ``b = d(p, r)``, ``c = d(p, q)``.  The three slacks
    are nonnegative on a Hadamard surface.
    """

    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float
    slack_cosines: float
    slack_double: float
    slack_angle_sum: float

    def passed(self, tol: float) -> bool:
        return min(self.slack_cosines, self.slack_double, self.slack_angle_sum) >= -tol

    def as_dict(self) -> dict:
        return asdict(self)


def _between(psi1: float, psi2: float) -> float:
    return float(abs(wrap_angle(psi1 - psi2)))


def _reverse_angle(v) -> float:
    return math.atan2(-v[1], -v[0])


def triangle_checks(model: HadamardModel, p, q, r, tol: Tolerances = DEFAULT) -> TriangleReport:
    """Side lengths, angles and comparison slacks of the geodesic triangle pqr.

    Three shooting solves suffice: the angle at the far end of a side is
    read off the reversed end velocity of that side.
    """
    pq = shoot(model, p, q, tol)
    pr = shoot(model, p, r, tol)
    qr = shoot(model, q, r, tol)
    c, b, a = pq.length, pr.length, qr.length
    alpha = _between(pq.psi, pr.psi)
    beta = _between(_reverse_angle(pq.end_velocity), qr.psi)
    gamma = _between(_reverse_angle(pr.end_velocity), _reverse_angle(qr.end_velocity))
    return TriangleReport(
        a=a, b=b, c=c, alpha=alpha, beta=beta, gamma=gamma,
        slack_cosines=c * c - (a * a + b * b - 2 * a * b * math.cos(gamma)),
        slack_double=(b * math.cos(alpha) + a * math.cos(beta)) - c,
        slack_angle_sum=math.pi - (alpha + beta + gamma),
    )


# ---------------------------------------------------------------------------
# perpendicular feet


@dataclass(frozen=True)
class Foot:
    point: np.ndarray
    s: float
    distance: float
    orthogonality: float  # |angle - pi/2| at the foot, radians


def _distance_and_angle(model, alpha: GeodesicPath, p, s, tol):
    a = alpha.at(s)
    shot = shoot(model, a, p, tol)
    t = alpha.velocity_at(s)
    ang = _between(shot.psi, math.atan2(t[1], t[0]))
    return shot.length, ang


def foot_of_perpendicular(model: HadamardModel, alpha: GeodesicPath, p,
                          tol: Tolerances = DEFAULT, *, n_scan: int = 17) -> Foot:
    """Closest point to ``p`` on the sampled geodesic ``alpha``.

    A coarse scan brackets the minimum, golden-section search narrows it,
    and a secant iteration on the orthogonality defect
    ``cos(angle between alpha' and the direction to p)`` polishes it.
    """
    p = np.asarray(p, dtype=float)
    ss = np.linspace(alpha.s_min, alpha.s_max, n_scan)
    d = np.array([shoot(model, alpha.at(s), p, tol).length if np.linalg.norm(alpha.at(s) - p) > 1e-14
                  else 0.0 for s in ss])
    if np.min(d) < tol.geometric:
        raise ValueError("point lies on the geodesic")
    k = int(np.argmin(d))
    lo, hi = ss[max(k - 1, 0)], ss[min(k + 1, n_scan - 1)]

    def dist(s):
        return shoot(model, alpha.at(s), p, tol).length

    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = dist(x1), dist(x2)
    used = 0
    while hi - lo > 1e-3 and used < tol.max_iter:
        used += 1
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = dist(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = dist(x2)

    def defect(s):
        _, ang = _distance_and_angle(model, alpha, p, s, tol)
        return math.cos(ang)

    s0, s1 = 0.5 * (lo + hi), 0.5 * (lo + hi) + 1e-4
    g0, g1 = defect(s0), defect(s1)
    for _ in range(30):
        used += 1
        if abs(g1) < 1e-12 or g1 == g0:
            break
        s0, s1, g0 = s1, s1 - g1 * (s1 - s0) / (g1 - g0), g1
        s1 = float(np.clip(s1, alpha.s_min, alpha.s_max))
        g1 = defect(s1)
    else:
        raise NoConvergence("foot of perpendicular: secant iteration did not converge")
    dist_f, ang = _distance_and_angle(model, alpha, p, s1, tol)
    return Foot(point=alpha.at(s1), s=float(s1), distance=dist_f,
                orthogonality=abs(ang - 0.5 * math.pi))


def distance_profile(model: HadamardModel, alpha: GeodesicPath, p, n: int = 201,
                     tol: Tolerances = DEFAULT):
    """Dense scan ``s -> d(p, alpha(s))`` (uniqueness oracle for feet)."""
    ss = np.linspace(alpha.s_min, alpha.s_max, n)
    return ss, np.array([shoot(model, alpha.at(s), p, tol).length for s in ss])


def count_local_minima(values) -> int:
    v = np.asarray(values)
    interior = (v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])
    ends = int(v[0] < v[1]) + int(v[-1] < v[-2])
    return int(np.sum(interior)) + ends
