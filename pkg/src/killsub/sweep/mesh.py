"""Triangle meshes over surface parameter domains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..surfaces.fixtures import GeodesicSphere, _chart_of_w


def _identity(c):
    return np.asarray(c, float)


@dataclass
class SurfaceMesh:
    """Triangulated sample of a surface.

    ``coords`` are interpolation coordinates (parameters, or unit vectors for
    spheres); ``lift(coords)`` maps them back onto the surface.  Edges are
    sorted vertex pairs; ``boundary_edge`` marks edges used by one triangle.
    """

    coords: np.ndarray
    points: np.ndarray
    triangles: np.ndarray
    lift: Callable
    interpolate: Callable
    params: np.ndarray
    to_params: Callable = field(default=_identity)

    def __post_init__(self):
        tri = self.triangles
        e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        e.sort(axis=1)
        edges, inverse, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
        self.edges = edges
        self.tri_edges = inverse.reshape(3, -1).T  # (m, 3): edges (01, 12, 20)
        self.boundary_edge = counts == 1
        bv = np.zeros(len(self.points), bool)
        bv[edges[self.boundary_edge].ravel()] = True
        self.boundary_vertex = bv

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def edge_points(self, i, j, lam):
        """Surface points at fraction ``lam`` along edges ``(i, j)``."""
        return self.lift(self.interpolate(self.coords[i], self.coords[j], lam))

    def boundary_loop(self) -> np.ndarray:
        """Vertex indices of the boundary, chained into a single loop (if it is one)."""
        be = self.edges[self.boundary_edge]
        if len(be) == 0:
            return np.zeros(0, int)
        nbr: dict[int, list[int]] = {}
        for a, b in be:
            nbr.setdefault(int(a), []).append(int(b))
            nbr.setdefault(int(b), []).append(int(a))
        start = int(be[0, 0])
        loop, prev, cur = [start], -1, start
        while True:
            nxt = [n for n in nbr[cur] if n != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            if cur == start:
                break
            loop.append(cur)
        return np.array(loop)


def _linear(a, b, lam):
    lam = np.asarray(lam, float)[..., None]
    return a + lam * (b - a)


def _grid_triangles(nu: int, nv: int, valid: np.ndarray, periodic_v: bool):
    idx = np.arange(nu * nv).reshape(nu, nv)
    jmax = nv if periodic_v else nv - 1
    I, J = np.meshgrid(np.arange(nu - 1), np.arange(jmax), indexing="ij")
    a = idx[I, J]
    b = idx[I + 1, J]
    c = idx[I + 1, (J + 1) % nv]
    d = idx[I, (J + 1) % nv]
    quads = np.stack([a, b, c, d], -1).reshape(-1, 4)
    ok = valid.ravel()[quads].all(axis=1)
    q = quads[ok]
    return np.concatenate([q[:, [0, 1, 2]], q[:, [0, 2, 3]]])


def rect_mesh(surface, step: float | None = None) -> SurfaceMesh:
    us, vs = surface.grid(step)
    U, V = np.meshgrid(us, vs, indexing="ij")
    valid = surface.inside(U, V)
    tris = _grid_triangles(len(us), len(vs), valid, surface.periodic_v)
    coords = np.stack([U.ravel(), V.ravel()], -1)
    period = surface.v_range[1] - surface.v_range[0]

    def interpolate(a, b, lam):
        if surface.periodic_v:
            d = b[..., 1] - a[..., 1]
            b = b.copy()
            b[..., 1] = a[..., 1] + (d + 0.5 * period) % period - 0.5 * period
        return _linear(a, b, lam)

    def lift(c):
        return surface.map(c[..., 0], c[..., 1])

    used = np.unique(tris)
    remap = -np.ones(len(coords), int)
    remap[used] = np.arange(len(used))
    coords = coords[used]
    return SurfaceMesh(coords=coords, points=lift(coords), triangles=remap[tris], lift=lift,
                       interpolate=interpolate, params=coords.copy())


def disk_mesh(surface, radius: float, step: float | None = None) -> SurfaceMesh:
    """Polar mesh of a chart disk (parameters are chart coordinates)."""
    step = surface.grid_step if step is None else step
    n_r = max(int(math.ceil(radius / step)), 2)
    n_t = max(int(math.ceil(2 * math.pi * radius / step)), 12)
    rs = radius * np.arange(1, n_r + 1) / n_r
    th = 2 * math.pi * np.arange(n_t) / n_t
    R, T = np.meshgrid(rs, th, indexing="ij")
    coords = np.concatenate([[[0.0, 0.0]], np.stack([R * np.cos(T), R * np.sin(T)], -1).reshape(-1, 2)])
    ring = lambda i, j: 1 + i * n_t + (j % n_t)  # noqa: E731
    tris = [[0, ring(0, j), ring(0, j + 1)] for j in range(n_t)]
    for i in range(n_r - 1):
        for j in range(n_t):
            a, b, c, d = ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1)
            tris += [[a, b, c], [a, c, d]]

    def lift(c):
        return surface.map(c[..., 0], c[..., 1])

    return SurfaceMesh(coords=coords, points=lift(coords), triangles=np.array(tris), lift=lift,
                       interpolate=_linear, params=coords.copy())


def sphere_mesh(sphere: GeodesicSphere, step: float | None = None) -> SurfaceMesh:
    """Latitude-longitude mesh with pole vertices; interpolation on the unit sphere of directions."""
    step = sphere.grid_step if step is None else step
    n_t = max(int(math.ceil(math.pi / step)), 4)
    n_p = 2 * n_t
    th = math.pi * np.arange(1, n_t) / n_t
    ph = 2 * math.pi * np.arange(n_p) / n_p
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    params = np.concatenate([[[0.0, 0.0]], np.stack([TH, PH], -1).reshape(-1, 2), [[math.pi, 0.0]]])
    w = sphere.w_map(params[:, 0], params[:, 1], 0)
    south = len(params) - 1
    ring = lambda i, j: 1 + i * n_p + (j % n_p)  # noqa: E731
    tris = [[0, ring(0, j), ring(0, j + 1)] for j in range(n_p)]
    for i in range(n_t - 2):
        for j in range(n_p):
            a, b, c, d = ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1)
            tris += [[a, b, c], [a, c, d]]
    tris += [[south, ring(n_t - 2, j + 1), ring(n_t - 2, j)] for j in range(n_p)]

    def interpolate(a, b, lam):
        c = _linear(a, b, lam)
        return c / np.linalg.norm(c, axis=-1, keepdims=True)

    def to_params(c):
        return np.stack(_chart_of_w(0, np.asarray(c, float)), -1)

    return SurfaceMesh(coords=w, points=sphere.map_w(w), triangles=np.array(tris),
                       lift=sphere.map_w, interpolate=interpolate, params=params,
                       to_params=to_params)


def mesh_for(surface, step: float | None = None) -> SurfaceMesh:
    if isinstance(surface, GeodesicSphere):
        return sphere_mesh(surface, step)
    if surface.meta.get("kind") in ("graph", "entire_graph", "saddle", "slice"):
        return disk_mesh(surface, surface.meta["radius"], step)
    return rect_mesh(surface, step)
