"""Immersed surfaces in a Killing submersion and their pointwise geometry.

Surfaces are given by a vectorised immersion ``F(u, v) -> (x, y, t)``.
Derivatives of ``F`` are fourth-order central differences with step
``grid_step / 8``; the intrinsic curvature uses the Brioschi formula on the
first fundamental form sampled with step ``grid_step``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..errors import RankDeficient
from ..submersion.model import SubmersionModel

_W1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0          # offsets -2, -1, 1, 2
_OFF1 = np.array([-2.0, -1.0, 1.0, 2.0])
_W2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # offsets -2..2
_OFF2 = np.arange(-2.0, 3.0)


@dataclass(frozen=True, eq=False)
class ImmersedSurface:
    """Single-chart immersed surface.

    ``mask(u, v)`` restricts a rectangular parameter box to the actual domain
    (e.g. a disk); ``periodic_v`` closes the ``v`` direction.  ``orientation``
    multiplies the normal ``F_u ^ F_v / |F_u ^ F_v|``.
    """

    name: str
    F: Callable
    u_range: tuple
    v_range: tuple
    grid_step: float = 0.05
    orientation: float = 1.0
    mask: Optional[Callable] = None
    periodic_v: bool = False
    complete: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_charts(self) -> int:
        return 1

    def map(self, u, v, chart: int = 0) -> np.ndarray:
        return np.asarray(self.F(np.asarray(u, float), np.asarray(v, float)), dtype=float)

    def flipped(self) -> "ImmersedSurface":
        return replace(self, orientation=-self.orientation)

    def with_orientation(self, sign: float) -> "ImmersedSurface":
        return replace(self, orientation=float(sign))

    def inside(self, u, v):
        u, v = np.asarray(u, float), np.asarray(v, float)
        ok = (u >= self.u_range[0]) & (u <= self.u_range[1])
        if not self.periodic_v:
            ok &= (v >= self.v_range[0]) & (v <= self.v_range[1])
        if self.mask is not None:
            ok &= np.asarray(self.mask(u, v), bool)
        return ok

    def grid(self, step: float | None = None):
        """Parameter grid axes covering the box at roughly ``step``."""
        step = self.grid_step if step is None else step
        nu = max(int(round((self.u_range[1] - self.u_range[0]) / step)), 2) + 1
        us = np.linspace(*self.u_range, nu)
        if self.periodic_v:
            nv = max(int(round((self.v_range[1] - self.v_range[0]) / step)), 3)
            vs = self.v_range[0] + (self.v_range[1] - self.v_range[0]) * np.arange(nv) / nv
        else:
            nv = max(int(round((self.v_range[1] - self.v_range[0]) / step)), 2) + 1
            vs = np.linspace(*self.v_range, nv)
        return us, vs

    def chart_params(self, u, v):
        """Chart selection hook (single chart: identity)."""
        return 0, np.asarray(u, float), np.asarray(v, float)


# ---------------------------------------------------------------------------
# derivatives


def _derivatives(surface, chart: int, u, v, h: float):
    """F, F_u, F_v, F_uu, F_uv, F_vv at arrays ``u, v`` (shape ``(n,)``)."""
    F = lambda a, b: surface.map(a, b, chart)  # noqa: E731
    F0 = F(u, v)
    Fu = sum(w * F(u + o * h, v) for w, o in zip(_W1, _OFF1)) / h
    Fv = sum(w * F(u, v + o * h) for w, o in zip(_W1, _OFF1)) / h
    Fuu = sum(w * (F(u + o * h, v) if o else F0) for w, o in zip(_W2, _OFF2)) / h ** 2
    Fvv = sum(w * (F(u, v + o * h) if o else F0) for w, o in zip(_W2, _OFF2)) / h ** 2
    Fuv = sum(wi * wj * F(u + oi * h, v + oj * h)
              for wi, oi in zip(_W1, _OFF1) for wj, oj in zip(_W1, _OFF1)) / h ** 2
    return F0, Fu, Fv, Fuu, Fuv, Fvv


def _first_derivatives(surface, chart, u, v, h):
    F = lambda a, b: surface.map(a, b, chart)  # noqa: E731
    Fu = sum(w * F(u + o * h, v) for w, o in zip(_W1, _OFF1)) / h
    Fv = sum(w * F(u, v + o * h) for w, o in zip(_W1, _OFF1)) / h
    return Fu, Fv


def _inner(G, a, b):
    return np.einsum("...i,...ij,...j->...", a, G, b)


def first_form(model: SubmersionModel, surface, chart: int, u, v, h: float | None = None):
    h = surface.grid_step / 8 if h is None else h
    u, v = np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))
    Fu, Fv = _first_derivatives(surface, chart, u, v, h)
    G = model.metric_batch(surface.map(u, v, chart))
    return _inner(G, Fu, Fu), _inner(G, Fu, Fv), _inner(G, Fv, Fv)


def unit_normal(model: SubmersionModel, surface, chart: int, u, v, h: float | None = None):
    """Oriented unit normal and angle function at parameter arrays."""
    h = surface.grid_step / 8 if h is None else h
    u, v = np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))
    P = surface.map(u, v, chart)
    Fu, Fv = _first_derivatives(surface, chart, u, v, h)
    G = model.metric_batch(P)
    W = model.wedge_batch(P, Fu, Fv)
    nrm = np.sqrt(np.maximum(_inner(G, W, W), 0.0))
    N = surface.orientation * W / np.where(nrm > 0, nrm, np.nan)[..., None]
    nu = np.einsum("...ij,...i,j->...", G, N, np.array([0.0, 0.0, 1.0]))
    return P, N, nu


@dataclass
class SurfaceGeometry:
    """Pointwise geometry; all fields are arrays over the sample set."""

    u: np.ndarray
    v: np.ndarray
    point: np.ndarray
    I: np.ndarray
    II: np.ndarray
    N: np.ndarray
    nu: np.ndarray
    T: np.ndarray
    T_norm2: np.ndarray
    S: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    H: np.ndarray
    Ke: np.ndarray
    K: Optional[np.ndarray]
    rank_margin: np.ndarray
    selfadjoint_residual: np.ndarray

    CSV_FIELDS = ("u", "v", "x", "y", "t", "nu", "k1", "k2", "H", "Ke", "K")

    def rows(self):
        K = self.K if self.K is not None else np.full_like(self.nu, np.nan)
        for i in range(len(self.u)):
            yield [self.u[i], self.v[i], *self.point[i], self.nu[i], self.k1[i], self.k2[i],
                   self.H[i], self.Ke[i], K[i]]


def write_geometry_csv(path, geom: SurfaceGeometry) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(SurfaceGeometry.CSV_FIELDS)
        for row in geom.rows():
            w.writerow([f"{x:.12g}" for x in row])


def brioschi(model: SubmersionModel, surface, chart: int, u, v, H: float | None = None):
    """Gauss curvature from the first fundamental form alone (Brioschi formula)."""
    H = surface.grid_step if H is None else H
    u, v = np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))
    offs = np.arange(-2, 3)
    # sample I on a 5x5 stencil
    UU, VV = np.broadcast_arrays(u[:, None, None] + H * offs[None, :, None],
                                 v[:, None, None] + H * offs[None, None, :])
    E, Fm, G = (a.reshape(UU.shape) for a in first_form(model, surface, chart, UU.ravel(), VV.ravel()))
    c = 2  # centre index

    def d_u(A):
        return sum(w * A[:, c + int(o), c] for w, o in zip(_W1, _OFF1)) / H

    def d_v(A):
        return sum(w * A[:, c, c + int(o)] for w, o in zip(_W1, _OFF1)) / H

    def d_uu(A):
        return sum(w * A[:, c + int(o), c] for w, o in zip(_W2, _OFF2)) / H ** 2

    def d_vv(A):
        return sum(w * A[:, c, c + int(o)] for w, o in zip(_W2, _OFF2)) / H ** 2

    def d_uv(A):
        return sum(wi * wj * A[:, c + int(oi), c + int(oj)]
                   for wi, oi in zip(_W1, _OFF1) for wj, oj in zip(_W1, _OFF1)) / H ** 2

    E0, F0, G0 = E[:, c, c], Fm[:, c, c], G[:, c, c]
    Eu, Ev, Fu, Fv, Gu, Gv = d_u(E), d_v(E), d_u(Fm), d_v(Fm), d_u(G), d_v(G)
    Evv, Guu, Fuv = d_vv(E), d_uu(G), d_uv(Fm)
    M1 = np.empty((len(u), 3, 3))
    M1[:, 0] = np.column_stack([-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev])
    M1[:, 1] = np.column_stack([Fv - 0.5 * Gu, E0, F0])
    M1[:, 2] = np.column_stack([0.5 * Gv, F0, G0])
    M2 = np.empty((len(u), 3, 3))
    M2[:, 0] = np.column_stack([np.zeros_like(E0), 0.5 * Ev, 0.5 * Gu])
    M2[:, 1] = np.column_stack([0.5 * Ev, E0, F0])
    M2[:, 2] = np.column_stack([0.5 * Gu, F0, G0])
    return (np.linalg.det(M1) - np.linalg.det(M2)) / (E0 * G0 - F0 * F0) ** 2


def surface_geometry(model: SubmersionModel, surface, u, v, *, chart: int | None = None,
                     intrinsic: bool = False, rank_tol: float = 1e-6) -> SurfaceGeometry:
    """Fundamental forms, normal, angle function and curvatures at parameter arrays.

    ``(u, v)`` are primary-chart parameters unless ``chart`` is given; multi-chart
    surfaces re-express each sample in its best-conditioned chart.
    """
    u, v = np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))
    if chart is None:
        chart, u, v = surface.chart_params(u, v)
    if np.ndim(chart) == 0:
        return _geometry_single(model, surface, int(chart), u, v, intrinsic, rank_tol)
    # mixed charts: evaluate per chart and scatter back
    chart = np.asarray(chart)
    parts = {c: _geometry_single(model, surface, int(c), u[chart == c], v[chart == c], intrinsic, rank_tol)
             for c in np.unique(chart)}
    out = {}
    for name in SurfaceGeometry.__dataclass_fields__:
        sample = getattr(next(iter(parts.values())), name)
        if sample is None:
            out[name] = None
            continue
        arr = np.empty((len(u),) + sample.shape[1:])
        for c, g in parts.items():
            arr[chart == c] = getattr(g, name)
        out[name] = arr
    return SurfaceGeometry(**out)


def _geometry_single(model, surface, chart, u, v, intrinsic, rank_tol) -> SurfaceGeometry:
    h = surface.grid_step / 8
    P, Fu, Fv, Fuu, Fuv, Fvv = _derivatives(surface, chart, u, v, h)
    G = model.metric_batch(P)
    gam = model.christoffel_batch(P)
    E, Fm, Gg = _inner(G, Fu, Fu), _inner(G, Fu, Fv), _inner(G, Fv, Fv)
    I = np.stack([np.stack([E, Fm], -1), np.stack([Fm, Gg], -1)], -2)
    detI = E * Gg - Fm * Fm
    # smallest singular value of the differential in metric-orthonormal terms
    rank_margin = np.sqrt(np.maximum(0.5 * (E + Gg) - np.sqrt(np.maximum(0.25 * (E - Gg) ** 2 + Fm * Fm, 0)), 0))
    if np.any(~(rank_margin > rank_tol)):
        bad = int(np.argmin(np.where(np.isfinite(rank_margin), rank_margin, -np.inf)))
        raise RankDeficient(f"dF degenerate at (u, v) = ({u[bad]:.6g}, {v[bad]:.6g}) in chart {chart}")
    W = model.wedge_batch(P, Fu, Fv)
    N = surface.orientation * W / np.sqrt(_inner(G, W, W))[..., None]

    def second(Fij, Fi, Fj):
        acc = Fij + np.einsum("...kij,...i,...j->...k", gam, Fi, Fj)
        return _inner(G, acc, N)

    II11, II12, II21, II22 = second(Fuu, Fu, Fu), second(Fuv, Fu, Fv), second(Fuv, Fv, Fu), second(Fvv, Fv, Fv)
    II12s = 0.5 * (II12 + II21)
    II = np.stack([np.stack([II11, II12s], -1), np.stack([II12s, II22], -1)], -2)
    S = np.linalg.solve(I, II)
    tr = (Gg * II11 - 2 * Fm * II12s + E * II22) / detI
    det = (II11 * II22 - II12s ** 2) / detI
    disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    k1, k2 = 0.5 * tr - disc, 0.5 * tr + disc
    xi = np.array([0.0, 0.0, 1.0])
    nu = np.einsum("...ij,...i,j->...", G, N, xi)
    T = xi - nu[..., None] * N
    K = brioschi(model, surface, chart, u, v) if intrinsic else None
    return SurfaceGeometry(u=u, v=v, point=P, I=I, II=II, N=N, nu=nu, T=T, T_norm2=_inner(G, T, T),
                           S=S, k1=k1, k2=k2, H=0.5 * tr, Ke=det, K=K, rank_margin=rank_margin,
                           selfadjoint_residual=np.abs(II12 - II21))


def orient_convex(model: SubmersionModel, surface, u0: float, v0: float):
    """Return ``surface`` oriented so that the mean curvature at ``(u0, v0)`` is positive."""
    g = surface_geometry(model, surface, [u0], [v0], chart=0)
    return surface if g.H[0] > 0 else surface.flipped()


# ---------------------------------------------------------------------------
# hypothesis check


@dataclass(frozen=True)
class HypothesisReport:
    passed: bool
    margin: float
    worst_point: tuple
    n_samples: int

    def as_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "worst_point": list(self.worst_point),
                "n_samples": self.n_samples}


def hypothesis_check(model: SubmersionModel, surface, u, v, tau=None) -> HypothesisReport:
    """Per-sample margin ``min(k1, k2) - |tau|``; passes iff every margin is positive.

    ``tau`` (array over samples) defaults to the fitted bundle curvature at
    each sample point.
    """
    from ..submersion.connection import compute_tau

    g = surface_geometry(model, surface, u, v)
    if tau is None:
        tau = np.array([compute_tau(model, p, strict=False).tau for p in g.point])
    margin = np.minimum(g.k1, g.k2) - np.abs(tau)
    i = int(np.argmin(margin))
    return HypothesisReport(passed=bool(np.all(margin > 0)), margin=float(margin[i]),
                            worst_point=(float(g.u[i]), float(g.v[i])), n_samples=len(margin))
