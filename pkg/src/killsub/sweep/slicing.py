"""Sections of a sampled surface by vertical planes.

A vertical plane is the zero set (or a level set) of a function of the
base point: the signed distance to its base geodesic, or the leaf
parameter of a Fermi chart.  Level sets are extracted by marching
triangles over the surface mesh, crossings are refined on the true surface
by Illinois (regula falsi) iteration along mesh edges, and segments are
chained through shared edges.  A chain ending on an edge that borders only
one valid triangle is open: it reaches the mesh boundary or the region
where the field is undefined (the computational window).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from ..base.ideal import OrientedGeodesic, Side, side_of
from ..errors import TangencySuspected
from ..submersion.model import SubmersionModel
from ..tolerances import DEFAULT, Tolerances
from .mesh import SurfaceMesh, mesh_for

ILLINOIS_STEPS = 40
LEVEL_TOL = 1e-11
COINCIDENT_TOL = 1e-12  # relative distance below which crossings are merged


# ---------------------------------------------------------------------------
# fields whose level sets are vertical planes


class PlaneField:
    """Interface: ``evaluate(points) -> (f, s)`` on surface points, the
    scale turning ``|grad f|`` into ``|grad signed distance|``, and flat plane
    coordinates of section points."""

    def evaluate(self, points):  # pragma: no cover - interface
        raise NotImplementedError

    def distance_scale(self, level, s):
        return np.ones_like(np.asarray(s, float))

    def plane_coords(self, level, s, fibre):  # pragma: no cover - interface
        raise NotImplementedError


@dataclass
class VerticalPlane:
    """``pi^{-1}(alpha)``; interior/exterior are the preimages of the sides of ``alpha``."""

    alpha: OrientedGeodesic

    def side(self, model: SubmersionModel, p, tol: Tolerances = DEFAULT) -> Side:
        return side_of(model.base, self.alpha, np.asarray(p, float)[:2], tol)


class GeodesicDistanceField(PlaneField):
    """Signed base distance to the geodesic of a vertical plane (nan beyond the sampled trace)."""

    def __init__(self, model: SubmersionModel, plane: VerticalPlane):
        self.model = model
        self.plane = plane
        path = plane.alpha.path
        a, b = model.omega_batch(path.points[:, 0], path.points[:, 1])
        w = a * path.velocities[:, 0] + b * path.velocities[:, 1]
        from scipy.integrate import cumulative_trapezoid

        cum = cumulative_trapezoid(w, path.s, initial=0.0)
        self._s = path.s
        self._W = cum - np.interp(0.0, path.s, cum)

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        s, d, at_end = self.plane.alpha.signed_distance(pts[:, :2])
        d = np.where(at_end, np.nan, d)
        return d, s

    def plane_coords(self, level, s, fibre):
        return np.stack([s, fibre + np.interp(s, self._s, self._W)], -1)


class FermiField(PlaneField):
    """Leaf parameter of a Fermi chart."""

    def __init__(self, chart):
        self.chart = chart

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return self.chart.invert(pts[:, :2])

    def distance_scale(self, level, s):
        return self.chart.jacobi_norm(np.full_like(s, level), s)

    def plane_coords(self, level, s, fibre):
        return self.chart.plane_coords(np.full_like(s, level), s, fibre)


# ---------------------------------------------------------------------------
# curves


@dataclass
class IntersectionCurve:
    """One connected component of a plane section.

    ``plane`` holds flat coordinates ``(s, t')`` in the vertical plane;
    ``points`` the 3D images; ``coords`` the mesh interpolation coordinates.
    ``window`` flags a chain that ends on the mesh boundary or at the edge of
    the region where the plane field is defined.
    """

    level: float
    coords: np.ndarray
    points: np.ndarray
    plane: np.ndarray
    closed: bool
    window: bool
    transversality: float
    triangles: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, int))
    chaining_step: float = 0.0

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def arclength(self) -> np.ndarray:
        pts = np.vstack([self.plane, self.plane[:1]]) if self.closed else self.plane
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        return np.r_[0.0, np.cumsum(seg)]

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @cached_property
    def diameter(self) -> float:
        p = self.plane
        if len(p) < 2:
            return 0.0
        if len(p) > 8:
            try:
                p = p[ConvexHull(p).vertices]
            except QhullError:
                pass
        return float(np.max(pdist(p)))

    def is_compact(self, cap: float = np.inf) -> bool:
        return bool(self.closed and not self.window and self.diameter < cap)

    @cached_property
    def kg(self) -> np.ndarray:
        """Per-vertex curvature in the flat plane coordinates."""
        from .convexity import plane_curvature

        return plane_curvature(self.plane, self.closed)

    def as_dict(self) -> dict:
        return {"level": self.level, "n": self.n, "closed": self.closed, "window": self.window,
                "diameter": self.diameter, "length": self.length,
                "transversality": self.transversality}


# ---------------------------------------------------------------------------
# extraction


@dataclass
class Section:
    """All components of one level set plus bookkeeping used by sweep tracking."""

    level: float
    curves: list
    crossed: np.ndarray  # triangles crossed by the level set
    min_transversality: float


def _refine(mesh: SurfaceMesh, fieldobj: PlaneField, edges: np.ndarray, f, level: float):
    """Illinois iteration along crossing edges; returns (coords, points, s, residual)."""
    i, j = edges[:, 0], edges[:, 1]
    a = np.zeros(len(edges))
    b = np.ones(len(edges))
    ga = f[i] - level
    gb = f[j] - level
    x = ga / (ga - gb)
    side = np.zeros(len(edges), int)
    s = np.full(len(edges), np.nan)
    g = np.full(len(edges), np.inf)
    active = np.ones(len(edges), bool)
    for _ in range(ILLINOIS_STEPS):
        k = np.flatnonzero(active)
        if len(k) == 0:
            break
        x[k] = (a[k] * gb[k] - b[k] * ga[k]) / (gb[k] - ga[k])
        pts = mesh.edge_points(i[k], j[k], x[k])
        fk, sk = fieldobj.evaluate(pts)
        gk = fk - level
        bad = ~np.isfinite(gk)
        gk = np.where(bad, 0.0, gk)
        g[k], s[k] = gk, sk
        done = (np.abs(gk) < LEVEL_TOL) | bad | (b[k] - a[k] < 1e-15)
        left = (gk * ga[k] > 0) & ~done      # root lies in [x, b]
        right = ~left & ~done
        # Illinois: halve the retained endpoint's value when an endpoint repeats
        a_new = np.where(left, x[k], a[k])
        b_new = np.where(right, x[k], b[k])
        ga_new = np.where(left, gk, np.where(right & (side[k] == -1), ga[k] * 0.5, ga[k]))
        gb_new = np.where(right, gk, np.where(left & (side[k] == 1), gb[k] * 0.5, gb[k]))
        side[k] = np.where(left, 1, np.where(right, -1, side[k]))
        a[k], b[k], ga[k], gb[k] = a_new, b_new, ga_new, gb_new
        active[k[done]] = False
    coords = mesh.interpolate(mesh.coords[i], mesh.coords[j], x)
    return coords, mesh.lift(coords), s, g


def _triangle_gradients(model: SubmersionModel, mesh: SurfaceMesh, tris, f) -> np.ndarray:
    """Metric norm of the surface gradient of the piecewise-linear interpolant of ``f``."""
    P = mesh.points[mesh.triangles[tris]]
    F = f[mesh.triangles[tris]]
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    G = model.metric_batch(P.mean(axis=1))
    g11 = np.einsum("ni,nij,nj->n", e1, G, e1)
    g12 = np.einsum("ni,nij,nj->n", e1, G, e2)
    g22 = np.einsum("ni,nij,nj->n", e2, G, e2)
    d1, d2 = F[:, 1] - F[:, 0], F[:, 2] - F[:, 0]
    det = g11 * g22 - g12 * g12
    return np.sqrt(np.maximum((g22 * d1 * d1 - 2 * g12 * d1 * d2 + g11 * d2 * d2) / det, 0.0))


def _chain(seg_edges: np.ndarray):
    """Chain segments (pairs of edge ids) into polylines of edge ids.

    Returns a list of ``(edge_ids, segment_ids, closed)``.
    """
    by_edge: dict[int, list[int]] = {}
    for k, (ea, eb) in enumerate(seg_edges):
        by_edge.setdefault(int(ea), []).append(k)
        by_edge.setdefault(int(eb), []).append(k)
    used = np.zeros(len(seg_edges), bool)
    out = []

    def walk(k, e):
        """Follow segments starting with segment ``k`` leaving through edge ``e``."""
        edges, segs = [], []
        while True:
            used[k] = True
            segs.append(k)
            edges.append(e)
            nxt = [m for m in by_edge[e] if not used[m]]
            if not nxt:
                return edges, segs
            k = nxt[0]
            ea, eb = seg_edges[k]
            e = int(eb) if int(ea) == e else int(ea)

    # open chains first: start at edges used by a single segment
    ends = [e for e, ks in by_edge.items() if len(ks) == 1]
    for e in sorted(ends):
        k = by_edge[e][0]
        if used[k]:
            continue
        ea, eb = seg_edges[k]
        other = int(eb) if int(ea) == e else int(ea)
        edges, segs = walk(k, other)
        out.append(([e] + edges, segs, False))
    for k in range(len(seg_edges)):
        if used[k]:
            continue
        ea, eb = (int(v) for v in seg_edges[k])
        edges, segs = walk(k, eb)
        closed = edges[-1] == ea
        out.append(([ea] + edges[:-1] if closed else [ea] + edges, segs, closed))
    return out


def _distinct(k: np.ndarray, points: np.ndarray, closed: bool) -> np.ndarray:
    """Drop consecutive coincident crossings.

    When the level passes exactly through a mesh vertex every edge at that
    vertex reports the same point; keep one of them.
    """
    if len(k) < 2:
        return k
    p = points[k]
    eps = COINCIDENT_TOL * (1.0 + float(np.max(np.abs(p))))
    keep = np.ones(len(k), bool)
    keep[1:] = np.linalg.norm(np.diff(p, axis=0), axis=1) > eps
    if closed:
        last = np.flatnonzero(keep)[-1]
        if last > 0 and np.linalg.norm(p[last] - p[0]) <= eps:
            keep[last] = False
    return k[keep]


def extract_level_set(model: SubmersionModel, mesh: SurfaceMesh, fieldobj: PlaneField,
                      f: np.ndarray, level: float) -> Section:
    """Components of ``{f = level}`` on the mesh (``f`` sampled at vertices, nan = undefined)."""
    tri = mesh.triangles
    ft = f[tri]
    valid = np.all(np.isfinite(ft), axis=1)
    above = ft >= level
    crossing = valid & (above.any(axis=1) & ~above.all(axis=1))
    idx = np.flatnonzero(crossing)
    if len(idx) == 0:
        return Section(level, [], idx, np.inf)
    # local edges 01, 12, 20 crossed?
    ab = above[idx]
    cross_local = np.stack([ab[:, 0] != ab[:, 1], ab[:, 1] != ab[:, 2], ab[:, 2] != ab[:, 0]], 1)
    te = mesh.tri_edges[idx]
    seg_edges = te[cross_local].reshape(-1, 2)
    ce = np.unique(seg_edges)
    coords, points, s, resid = _refine(mesh, fieldobj, mesh.edges[ce], f, level)
    pos = {int(e): k for k, e in enumerate(ce)}

    grad = _triangle_gradients(model, mesh, idx, f)
    out = []
    min_tr = np.inf
    # a crossing edge is shared by two crossing triangles unless the other
    # triangle is missing or undefined, so open chains always end on the window
    for edges, segs, closed in _chain(seg_edges):
        k = _distinct(np.array([pos[e] for e in edges]), points, closed)
        pts = points[k]
        sk = s[k]
        plane = fieldobj.plane_coords(level, sk, pts[:, 2])
        scale = fieldobj.distance_scale(level, sk)
        seg_scale = np.nanmean(scale) if np.any(np.isfinite(scale)) else 1.0
        tr = float(np.min(grad[segs]) * seg_scale)
        step = float(np.max(np.linalg.norm(np.diff(plane, axis=0), axis=1))) if len(plane) > 1 else 0.0
        out.append(IntersectionCurve(level=float(level), coords=coords[k], points=pts, plane=plane,
                                     closed=closed, window=not closed,
                                     transversality=tr, triangles=idx[segs], chaining_step=step))
        min_tr = min(min_tr, tr)
    return Section(float(level), out, idx, min_tr)


def intersect(model: SubmersionModel, surface, plane: VerticalPlane, *, mesh: SurfaceMesh | None = None,
              tol: Tolerances = DEFAULT, step: float | None = None) -> list:
    """Components of ``surface`` cut by the vertical plane (zero set of the signed distance)."""
    mesh = mesh_for(surface, step) if mesh is None else mesh
    fieldobj = GeodesicDistanceField(model, plane)
    f, _ = fieldobj.evaluate(mesh.points)
    sec = extract_level_set(model, mesh, fieldobj, f, 0.0)
    if sec.curves and sec.min_transversality < tol.tangency:
        raise TangencySuspected(f"plane nearly tangent to the surface (|grad| = {sec.min_transversality:.2e})")
    return sec.curves
