"""Concrete surfaces: slices, Killing graphs, vertical cylinders, geodesic spheres,
a surface with a flaring end, and a saddle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..base.geodesic import GeodesicPath
from ..base.models import PoincareDisk
from ..submersion.connection import compute_tau
from ..submersion.model import SubmersionModel
from ..tolerances import DEFAULT, Tolerances
from .curves import geodesic_curvature
from .surface import ImmersedSurface, orient_convex, surface_geometry, unit_normal


# ---------------------------------------------------------------------------
# graphs


def killing_graph(model: SubmersionModel, h, *, radius: float = 0.9, grid_step: float = 0.02,
                  name: str = "graph") -> ImmersedSurface:
    """Section ``(x, y) -> (x, y, h(x, y))`` over the chart disk of the given radius.

    The parameters are the chart coordinates, so ``pi o F`` is the identity.
    With orientation +1 the normal has positive angle function.
    """

    def F(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.stack([x, y, np.broadcast_to(h(x, y), x.shape)], axis=-1)

    def mask(x, y):
        return x * x + y * y <= radius * radius

    return ImmersedSurface(name=name, F=F, u_range=(-radius, radius), v_range=(-radius, radius),
                           grid_step=grid_step, mask=mask, complete=False,
                           meta={"kind": "graph", "radius": radius})


def graph_angle_function(model: SubmersionModel, x, y, hx=0.0, hy=0.0):
    """Closed-form angle function of a graph: ``1 / sqrt(1 + |dh + omega|^2 / lambda^2)``."""
    a, b = model.omega_batch(np.asarray(x, float), np.asarray(y, float))
    lam = model.base.lam(x, y)
    return 1.0 / np.sqrt(1.0 + ((hx + a) ** 2 + (hy + b) ** 2) / lam ** 2)


def horizontal_slice(model: SubmersionModel, *, radius: float = 0.8, grid_step: float = 0.02):
    return killing_graph(model, lambda x, y: np.zeros_like(x), radius=radius,
                         grid_step=grid_step, name="slice")


def entire_convex_graph(model: SubmersionModel, *, coeff: float = 0.2, radius: float = 0.9,
                        grid_step: float = 0.02) -> ImmersedSurface:
    """Graph of ``coeff * d(o, .)^2`` (d the base distance to the origin)."""
    base = model.base

    def h(x, y):
        return coeff * base.distance_from_basepoint(x, y) ** 2

    s = killing_graph(model, h, radius=radius, grid_step=grid_step, name="convex_graph")
    return replace(s, complete=True, meta=dict(s.meta, kind="entire_graph", coeff=coeff))


def saddle_graph(model: SubmersionModel, *, coeff: float = 0.5, radius: float = 0.8,
                 grid_step: float = 0.02) -> ImmersedSurface:
    """Graph of ``coeff (x^2 - y^2)``: violates positivity of the principal curvatures."""
    s = killing_graph(model, lambda x, y: coeff * (x * x - y * y), radius=radius,
                      grid_step=grid_step, name="saddle")
    return replace(s, meta=dict(s.meta, kind="saddle", coeff=coeff))


# ---------------------------------------------------------------------------
# vertical cylinders


@dataclass(frozen=True, eq=False)
class VerticalCylinder:
    """``pi^{-1}(alpha)`` parametrised by ``(t, s)`` so that ``F_t ^ F_s`` is the
    horizontal lift of the counter-clockwise normal of ``alpha``."""

    curve: GeodesicPath
    surface: ImmersedSurface
    is_plane: bool = False


def vertical_cylinder(model: SubmersionModel, curve: GeodesicPath, *, t_half: float = 1.0,
                      grid_step: float = 0.02, is_plane: bool = False) -> VerticalCylinder:
    pad = 3 * grid_step

    def F(t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        xy = np.asarray(curve.at(s.ravel())).reshape(s.shape + (2,))
        return np.concatenate([xy, t[..., None]], axis=-1)

    surf = ImmersedSurface(name="vertical_plane" if is_plane else "cylinder", F=F,
                           u_range=(-t_half, t_half), v_range=(curve.s_min + pad, curve.s_max - pad),
                           grid_step=grid_step, complete=False,
                           meta={"kind": "plane" if is_plane else "cylinder"})
    return VerticalCylinder(curve=curve, surface=surf, is_plane=is_plane)


def cylinder_geometry(model: SubmersionModel, cyl: VerticalCylinder, s: float, t: float = 0.0,
                      tol: Tolerances = DEFAULT) -> dict:
    """Second fundamental form in the ordered basis ``(xi, T)`` plus H, K, K_e.

    ``T`` is the horizontal lift of the curve's unit tangent.
    """
    g = surface_geometry(model, cyl.surface, [t], [s], chart=0, intrinsic=True)
    P = g.point[0]
    Fs = np.array([*cyl.curve.velocity_at(s), 0.0])
    c = model.inner(P, Fs, model.xi(P))  # F_s = T + c xi
    B = np.array([[1.0, 0.0], [-c, 1.0]])
    II = B @ g.II[0] @ B.T
    kg = geodesic_curvature(model.base, cyl.curve, s, tol)
    tau = compute_tau(model, P, tol).tau
    return {"II": II, "H": float(g.H[0]), "K": float(g.K[0]), "Ke": float(g.Ke[0]),
            "nu": float(g.nu[0]), "kg": kg, "tau": tau, "point": P}


# ---------------------------------------------------------------------------
# geodesic spheres in a product over the Poincare disk


def _w_chart(chart: int, th, ps):
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ps), np.cos(ps)
    if chart == 0:
        return np.stack([st * cp, st * sp, ct], axis=-1)
    return np.stack([ct, st * cp, st * sp], axis=-1)


def _chart_of_w(chart: int, w):
    w = np.clip(w, -1.0, 1.0)
    if chart == 0:
        return np.arccos(w[..., 2]), np.mod(np.arctan2(w[..., 1], w[..., 0]), 2 * math.pi)
    return np.arccos(w[..., 0]), np.mod(np.arctan2(w[..., 2], w[..., 1]), 2 * math.pi)


@dataclass(frozen=True, eq=False)
class GeodesicSphere:
    """Distance sphere ``{exp_c(R w) : |w| = 1}`` in ``H^2 x R`` (two polar charts).

    Chart 0 has its poles on the fibre through the centre; chart 1 has its
    poles on the horizontal axis ``w = (+-1, 0, 0)``.  Parameters are
    (polar angle, azimuth); per-point operations accept primary-chart
    parameters and switch to chart 1 near the poles of chart 0.
    """

    base: PoincareDisk
    center: tuple
    radius: float
    grid_step: float = 0.05
    orientation: float = 1.0
    complete: bool = True
    name: str = "sphere"
    meta: dict = field(default_factory=dict)

    n_charts = 2
    u_range = (0.0, math.pi)
    v_range = (0.0, 2 * math.pi)
    periodic_v = True

    def w_map(self, u, v, chart: int = 0):
        return _w_chart(chart, np.asarray(u, float), np.asarray(v, float))

    def map_w(self, w):
        w = np.asarray(w, float)
        rad = self.radius * np.hypot(w[..., 0], w[..., 1])
        ang = np.arctan2(w[..., 1], w[..., 0])
        xy = self.base.exp_points(np.asarray(self.center[:2], float), ang, rad)
        return np.concatenate([xy, (self.center[2] + self.radius * w[..., 2])[..., None]], axis=-1)

    def map(self, u, v, chart: int = 0):
        return self.map_w(self.w_map(u, v, chart))

    def chart_params(self, u, v):
        u, v = np.asarray(u, float), np.asarray(v, float)
        near_pole = np.sin(u) < 0.5
        if not np.any(near_pole):
            return 0, u, v
        u1, v1 = _chart_of_w(1, self.w_map(u, v, 0))
        return np.where(near_pole, 1, 0), np.where(near_pole, u1, u), np.where(near_pole, v1, v)

    def flipped(self):
        return replace(self, orientation=-self.orientation)

    def sample_w(self, n: int) -> np.ndarray:
        """Fibonacci-lattice directions (deterministic, near uniform)."""
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = math.pi * (1 + 5 ** 0.5) * k
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)

    def sample_params(self, n: int):
        """Primary-chart parameters of ``n`` near-uniform samples."""
        return _chart_of_w(0, self.sample_w(n))

    def distance_function(self, pts):
        """Closed-form distance to the centre (oracle)."""
        pts = np.asarray(pts, float)
        c = np.asarray(self.center, float)
        a = self.base.a
        dz2 = (pts[..., 0] - c[0]) ** 2 + (pts[..., 1] - c[1]) ** 2
        m1 = 1 - pts[..., 0] ** 2 - pts[..., 1] ** 2
        m0 = 1 - c[0] ** 2 - c[1] ** 2
        dh = np.arccosh(1 + 2 * dz2 / (m1 * m0)) / a
        return np.sqrt(dh ** 2 + (pts[..., 2] - c[2]) ** 2)


def geodesic_sphere(model: SubmersionModel, center, radius: float, *,
                    grid_step: float = 0.05) -> GeodesicSphere:
    """Geodesic sphere with the inward (convex-side) normal."""
    if not isinstance(model.base, PoincareDisk) or np.any(model.omega_batch(np.zeros(1), np.zeros(1))[0]):
        raise ValueError("geodesic sphere fixture needs a product over the Poincare disk")
    sph = GeodesicSphere(base=model.base, center=tuple(float(c) for c in center),
                         radius=float(radius), grid_step=grid_step,
                         meta={"kind": "sphere", "center": [float(c) for c in center],
                               "radius": float(radius)})
    return orient_convex(model, sph, 0.5 * math.pi, 0.0)


# ---------------------------------------------------------------------------
# surface with a flaring end


@dataclass(frozen=True)
class FlaringSpec:
    """Horocycle-ruled surface ``log y = sigma0 + t^2 / (2 c)`` in upper-half-plane
    coordinates ``(x, y)`` of the base, carried to the disk by the Cayley map
    sending ``i`` to ``o`` and ``infinity`` to the ideal point at angle ``theta0``."""

    theta0: float = 0.7
    sigma0: float = 0.0
    c: float = 1.0
    u_half: float = 11.0
    v_half: float = 2.8


def cayley(theta0: float, z):
    return np.exp(1j * theta0) * (z - 1j) / (z + 1j)


def cayley_inverse(theta0: float, w):
    w = w * np.exp(-1j * theta0)
    return 1j * (1 + w) / (1 - w)


def flaring_surface(model: SubmersionModel, spec: FlaringSpec = FlaringSpec(), *,
                    grid_step: float = 0.05) -> ImmersedSurface:
    """Complete surface homeomorphic to the plane whose projection is a horoball at ``theta0``.

    Parameters ``(u, v)``: ``x = sinh(u)``, ``t = v``.  Principal curvatures
    have the closed form ``1 / sqrt(1 + g'^2)`` and ``g'' / (1 + g'^2)^{3/2}``
    with ``g(t) = sigma0 + t^2 / (2c)``.
    """

    def F(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        y = np.exp(spec.sigma0 + v * v / (2 * spec.c))
        w = cayley(spec.theta0, np.sinh(u) + 1j * y)
        return np.stack([w.real, w.imag, v], axis=-1)

    surf = ImmersedSurface(name="flaring", F=F, u_range=(-spec.u_half, spec.u_half),
                           v_range=(-spec.v_half, spec.v_half), grid_step=grid_step,
                           complete=True, meta={"kind": "flaring", "theta0": spec.theta0})
    return orient_convex(model, surf, 0.0, 0.0)


def flaring_principal_curvatures(spec: FlaringSpec, t):
    gp = np.asarray(t, float) / spec.c
    gpp = 1.0 / spec.c
    k_horo = 1.0 / np.sqrt(1 + gp * gp)
    k_prof = gpp / (1 + gp * gp) ** 1.5
    return np.minimum(k_horo, k_prof), np.maximum(k_horo, k_prof)


def vertical_plane(model: SubmersionModel, geodesic: GeodesicPath, *, t_half: float = 1.0,
                   grid_step: float = 0.02) -> VerticalCylinder:
    return vertical_cylinder(model, geodesic, t_half=t_half, grid_step=grid_step, is_plane=True)


def angle_function_grid(model: SubmersionModel, surface, u, v, chart: int = 0):
    """Angle function at arrays of parameters (no curvature work)."""
    _, _, nu = unit_normal(model, surface, chart, u, v)
    return nu
