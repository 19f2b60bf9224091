"""Horizontal-normal locus, view angles from the basepoint and the simple-end test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..base.geodesic import wrap_angle
from ..base.ideal import ideal_geodesic
from ..errors import GeometryError, InsufficientExtent, TangencySuspected
from ..submersion.model import SubmersionModel
from ..surfaces.fixtures import GeodesicSphere
from ..surfaces.surface import unit_normal
from ..tolerances import DEFAULT, Tolerances
from .mesh import SurfaceMesh, mesh_for
from .slicing import VerticalPlane, intersect

TWO_PI = 2 * math.pi
NU_ZERO = 1e-8
SPREAD_EPS = 0.05
MIN_EXTENT = 4.0


def angle_function_at(model: SubmersionModel, surface, params) -> np.ndarray:
    """Angle function at primary-chart parameters (multi-chart surfaces switch charts)."""
    params = np.atleast_2d(np.asarray(params, float))
    chart, u, v = surface.chart_params(params[:, 0], params[:, 1])
    if np.ndim(chart) == 0:
        return unit_normal(model, surface, int(chart), u, v)[2]
    nu = np.empty(len(params))
    for c in np.unique(chart):
        sel = chart == c
        nu[sel] = unit_normal(model, surface, int(c), u[sel], v[sel])[2]
    return nu


def vertex_angle_function(model: SubmersionModel, surface, mesh: SurfaceMesh) -> np.ndarray:
    return angle_function_at(model, surface, mesh.params)


def horizontal_normal_points(model: SubmersionModel, surface, mesh: SurfaceMesh | None = None, *,
                             nu: np.ndarray | None = None, steps: int = 60) -> np.ndarray:
    """Parameter points where the normal is horizontal (``|nu| <= 1e-8``).

    Vertices with ``|nu| <= 1e-8`` are returned as they are; every mesh edge
    along which ``nu`` changes sign contributes the point found by bisection.
    """
    mesh = mesh_for(surface) if mesh is None else mesh
    nu = vertex_angle_function(model, surface, mesh) if nu is None else nu
    zero_v = np.abs(nu) <= NU_ZERO
    out = [mesh.params[zero_v]]
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    sc = (~zero_v[i]) & (~zero_v[j]) & (np.sign(nu[i]) != np.sign(nu[j]))
    i, j = i[sc], j[sc]
    if len(i):
        lo, hi = np.zeros(len(i)), np.ones(len(i))
        nlo = nu[i]
        mid = 0.5 * (lo + hi)
        val = np.full(len(i), np.inf)
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            val = angle_function_at(model, surface, mesh.to_params(mesh.interpolate(
                mesh.coords[i], mesh.coords[j], mid)))
            same = np.sign(val) == np.sign(nlo)
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
            if np.all(np.abs(val) <= NU_ZERO):
                break
        keep = np.abs(val) <= NU_ZERO
        out.append(mesh.to_params(mesh.interpolate(mesh.coords[i], mesh.coords[j], mid))[keep])
    return np.concatenate(out) if out else np.zeros((0, 2))


# ---------------------------------------------------------------------------
# angles at the basepoint


def view_angles(model: SubmersionModel, pts) -> np.ndarray:
    """Direction angle at ``o`` of base points (the ideal angle of the ray through them on
    models whose geodesics through ``o`` are chart lines; the chart angle otherwise)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    return np.arctan2(pts[:, 1], pts[:, 0])


def angular_extent(angles) -> tuple:
    """Smallest arc containing all angles: ``(width, midpoint)``."""
    a = np.sort(np.mod(np.asarray(angles, float), TWO_PI))
    if len(a) == 0:
        return 0.0, float("nan")
    if len(a) == 1:
        return 0.0, float(wrap_angle(a[0]))
    gaps = np.diff(np.r_[a, a[0] + TWO_PI])
    k = int(np.argmax(gaps))
    start = a[(k + 1) % len(a)]
    width = TWO_PI - gaps[k]
    return float(width), float(wrap_angle(start + 0.5 * width))


# ---------------------------------------------------------------------------
# probe planes avoiding an ideal point


def rotating_family(model: SubmersionModel, theta_e: float, delta: float, n: int,
                    tol: Tolerances = DEFAULT):
    """Geodesics with ideal endpoints ``theta_e - delta`` (fixed) and
    ``theta_e + delta + s`` (rotating away from ``theta_e``).

    Every member keeps both endpoints at angle at least ``delta`` from
    ``theta_e``; the first member is the tightest one around ``theta_e``.
    """
    s_max = TWO_PI - 3 * delta
    out = []
    for s in np.linspace(0.0, s_max, n):
        out.append((float(s), ideal_geodesic(model.base, theta_e - delta, theta_e + delta + s, tol)))
    return out


@dataclass
class ProbeResult:
    s: float
    endpoints: tuple
    n_curves: int
    compact: bool
    max_diameter: float
    note: str = ""

    def as_dict(self) -> dict:
        return {"s": self.s, "endpoints": list(self.endpoints), "n_curves": self.n_curves,
                "compact": self.compact, "max_diameter": self.max_diameter, "note": self.note}


def probe_sections(model: SubmersionModel, surface, mesh: SurfaceMesh, family, *,
                   diameter_cap: float, tol: Tolerances = DEFAULT) -> list:
    """Intersect the surface with the vertical plane over each probe geodesic."""
    out = []
    for s, alpha in family:
        ends = (alpha.theta1.angle, alpha.theta2.angle)
        try:
            curves = intersect(model, surface, VerticalPlane(alpha), mesh=mesh, tol=tol)
            note = ""
        except TangencySuspected as exc:
            out.append(ProbeResult(s, ends, -1, False, float("nan"), f"tangency: {exc}"))
            continue
        diam = max((c.diameter for c in curves), default=0.0)
        compact = all(c.is_compact(diameter_cap) for c in curves)
        out.append(ProbeResult(s, ends, len(curves), compact, diam, note))
    return out


# ---------------------------------------------------------------------------
# simple end test


@dataclass
class SimpleEndReport:
    status: str                    # Passed | Failed | NotApplicable
    theta0: float = float("nan")
    r_max: float = 0.0
    spread_quarter: float = float("nan")
    spread_half: float = float("nan")
    part_i: bool = False
    part_ii: bool = False
    probes: list = field(default_factory=list)
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "Passed"

    def as_dict(self) -> dict:
        return {"status": self.status, "theta0": self.theta0, "r_max": self.r_max,
                "spread_quarter": self.spread_quarter, "spread_half": self.spread_half,
                "part_i": self.part_i, "part_ii": self.part_ii,
                "probes": [p.as_dict() for p in self.probes], "reason": self.reason}


def far_spread(model: SubmersionModel, pts, radius: float) -> tuple:
    d = model.base.distance_from_basepoint(pts[:, 0], pts[:, 1])
    far = pts[d >= radius]
    if len(far) == 0:
        return float("nan"), float("nan"), 0
    w, mid = angular_extent(view_angles(model, far))
    return w, mid, len(far)


def simple_end_test(model: SubmersionModel, surface, mesh: SurfaceMesh | None = None, *,
                    eta: float = 0.3, n_probe: int = 8, eps: float = SPREAD_EPS,
                    diameter_cap: float = 50.0, min_extent: float = MIN_EXTENT,
                    tol: Tolerances = DEFAULT) -> SimpleEndReport:
    """Finite witness of a simple end.

    (i) The far samples of the projection, at distance at least ``R/4`` and
    ``R/2`` from ``o`` (``R`` the sampled extent), must lie in angular arcs
    that contract, the outer one narrower than ``eps``; its midpoint
    estimates ``theta0``.  (ii) Vertical planes over a rotating family of
    geodesics whose endpoints stay ``eta`` away from ``theta0`` must cut the
    surface in compact curves (or not at all).
    """
    if isinstance(surface, GeodesicSphere) or surface.meta.get("kind") == "sphere":
        return SimpleEndReport("NotApplicable", reason="surface is compact")
    mesh = mesh_for(surface) if mesh is None else mesh
    pts = mesh.points[:, :2]
    d = model.base.distance_from_basepoint(pts[:, 0], pts[:, 1])
    r_max = float(np.max(d))
    wq, _, nq = far_spread(model, pts, 0.25 * r_max)
    wh, mid, nh = far_spread(model, pts, 0.5 * r_max)
    rep = SimpleEndReport("Failed", theta0=mid, r_max=r_max, spread_quarter=wq, spread_half=wh)
    if wh >= math.pi:
        # far samples in every half-plane at o: no single ideal point, whatever the extent
        rep.reason = f"far angular spread {wh:.3g} covers a half-circle"
        return rep
    if r_max < min_extent:
        raise InsufficientExtent(f"sampled extent {r_max:.3f} is below {min_extent}")
    if nh < 10:
        raise InsufficientExtent(f"only {nh} samples beyond half the sampled extent")
    rep.part_i = bool(wh < eps and wh <= wq)
    if not rep.part_i:
        rep.reason = f"far angular spread {wh:.3g} does not contract below {eps}"
        return rep
    try:
        family = rotating_family(model, mid, eta, n_probe, tol)
    except GeometryError as exc:
        rep.reason = f"probe family failed: {exc}"
        return rep
    rep.probes = probe_sections(model, surface, mesh, family, diameter_cap=diameter_cap, tol=tol)
    rep.part_ii = all(p.compact for p in rep.probes)
    rep.status = "Passed" if rep.part_ii else "Failed"
    if not rep.part_ii:
        rep.reason = "a probe plane avoiding theta0 meets the surface in a non-compact curve"
    return rep
