"""Fermi chart of an oriented foliation of vertical planes.

The leaves are the geodesics through ``beta(t)`` orthogonal to a base
geodesic ``beta``, oriented along ``J beta'``.  A base point ``p`` gets
coordinates ``(t, s)``: ``p`` lies on the leaf through ``beta(t)`` at arc
length ``s`` from ``beta(t)``.  The chart is tabulated from integrated
leaves and inverted by Newton's method on a bivariate spline.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from ..base.geodesic import GeodesicPath, geodesic_line
from ..errors import StepFailure
from ..submersion.model import SubmersionModel

NEWTON_STEPS = 12
INVERSION_TOL = 1e-11


def _leaf_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    n = max(int(math.ceil((t1 - t0) / dt)), 4) + 1
    return np.linspace(t0, t1, n)


class FermiChart:
    """Tabulated Fermi coordinates ``(t, s)`` along ``beta`` on ``[t0, t1] x [-reach, reach]``.

    ``W(t, s) = int_0^s omega(alpha_t')`` turns the fibre coordinate into the
    flat second coordinate of the vertical plane over the leaf.
    """

    def __init__(self, model: SubmersionModel, beta: GeodesicPath, t0: float, t1: float, *,
                 reach: float = 8.0, dt: float = 0.05, ds: float = 0.05):
        if not (beta.s_min <= t0 < t1 <= beta.s_max):
            raise ValueError("chart range must lie inside the sampled range of beta")
        self.model = model
        self.beta = beta
        self.t = _leaf_grid(t0, t1, dt)
        for _ in range(12):
            try:
                leaves = [self._leaf(tk, reach, ds) for tk in self.t]
                break
            except StepFailure:
                reach *= 0.8
        else:
            raise StepFailure("leaves of the Fermi chart leave the chart")
        self.reach = float(reach)
        self.s = leaves[0].s
        X = np.stack([lf.points[:, 0] for lf in leaves])
        Y = np.stack([lf.points[:, 1] for lf in leaves])
        a, b = model.omega_batch(X, Y)
        VX = np.stack([lf.velocities[:, 0] for lf in leaves])
        VY = np.stack([lf.velocities[:, 1] for lf in leaves])
        w = a * VX + b * VY
        cum = cumulative_simpson(w, x=self.s, axis=1, initial=0.0)
        i0 = int(np.argmin(np.abs(self.s)))
        Wt = cum - cum[:, i0:i0 + 1]
        k = 5 if len(self.t) > 5 else 3
        self._x = RectBivariateSpline(self.t, self.s, X, kx=k, ky=5)
        self._y = RectBivariateSpline(self.t, self.s, Y, kx=k, ky=5)
        self._w = RectBivariateSpline(self.t, self.s, Wt, kx=k, ky=5)
        self._table = np.stack([X.ravel(), Y.ravel()], -1)
        self._index = np.stack(np.meshgrid(np.arange(len(self.t)), np.arange(len(self.s)),
                                           indexing="ij"), -1).reshape(-1, 2)
        self._tree = cKDTree(self._table)
        self.has_connection = bool(np.any(w != 0))

    def _leaf(self, tk: float, reach: float, ds: float) -> GeodesicPath:
        base = self.model.base
        p = self.beta.at(tk)
        v = self.beta.velocity_at(tk)
        n = np.array([-v[1], v[0]])
        n = n / base.norm(p, n)
        return geodesic_line(base, p, n, reach, reach, ds=ds)

    @property
    def t_range(self) -> tuple:
        return float(self.t[0]), float(self.t[-1])

    # -- forward map ---------------------------------------------------------
    def point(self, t, s) -> np.ndarray:
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        return np.stack([self._x.ev(t, s), self._y.ev(t, s)], -1)

    def W(self, t, s):
        return self._w.ev(t, s)

    def jacobi_norm(self, t, s):
        """Metric length of ``d/dt`` (the spacing of neighbouring leaves)."""
        xt, yt = self._x.ev(t, s, dx=1), self._y.ev(t, s, dx=1)
        x, y = self._x.ev(t, s), self._y.ev(t, s)
        return self.model.base.lam(x, y) * np.hypot(xt, yt)

    def plane_coords(self, t, s, fibre):
        """Flat coordinates ``(s, fibre + W)`` in the vertical plane over the leaf ``t``."""
        return np.stack([np.asarray(s, float), np.asarray(fibre, float) + self.W(t, s)], -1)

    # -- inverse map ---------------------------------------------------------
    def invert(self, pts, guess=None):
        """Fermi coordinates of base points.

        Returns ``(t, s)``.  Points beyond the first or last leaf get
        ``t0 - 1`` or ``t1 + 1``; points farther than ``reach`` along their
        leaf (or otherwise unresolved) get ``nan``.
        """
        pts = np.atleast_2d(np.asarray(pts, float))
        t0, t1 = self.t_range
        S = self.reach
        _, idx = self._tree.query(pts)
        ij = self._index[idx]
        if guess is None:
            t = self.t[ij[:, 0]].copy()
            s = self.s[ij[:, 1]].copy()
        else:
            t, s = (np.array(g, float) for g in guess)
        for _ in range(NEWTON_STEPS):
            x, y = self._x.ev(t, s), self._y.ev(t, s)
            xt, xs = self._x.ev(t, s, dx=1), self._x.ev(t, s, dy=1)
            yt, ys = self._y.ev(t, s, dx=1), self._y.ev(t, s, dy=1)
            rx, ry = pts[:, 0] - x, pts[:, 1] - y
            det = xt * ys - xs * yt
            det = np.where(det == 0, 1e-300, det)
            dt_ = (ys * rx - xs * ry) / det
            ds_ = (-yt * rx + xt * ry) / det
            t = np.clip(t + np.clip(dt_, -0.5, 0.5), t0, t1)
            s = np.clip(s + np.clip(ds_, -0.5, 0.5), -S, S)
            if np.max(np.abs(dt_) + np.abs(ds_), initial=0.0) < 1e-14:
                break
        x, y = self._x.ev(t, s), self._y.ev(t, s)
        lam = self.model.base.lam(pts[:, 0], pts[:, 1])
        res = lam * np.hypot(pts[:, 0] - x, pts[:, 1] - y)
        ok = res < INVERSION_TOL * max(1.0, S)
        t = np.where(ok, t, np.nan)
        s = np.where(ok, s, np.nan)
        bad = np.flatnonzero(~ok)
        if len(bad):
            i, j = ij[bad, 0], ij[bad, 1]
            inner = np.abs(self.s[j]) < S - 2 * (self.s[1] - self.s[0])
            vx, vy = self._x.ev(self.t[i], self.s[j], dy=1), self._y.ev(self.t[i], self.s[j], dy=1)
            q = self._table[idx[bad]]
            ahead = (pts[bad, 0] - q[:, 0]) * vy - (pts[bad, 1] - q[:, 1]) * vx
            last = i == len(self.t) - 1
            first = i == 0
            t[bad] = np.where(inner & last & (ahead > 0), t1 + 1.0,
                              np.where(inner & first & (ahead < 0), t0 - 1.0, np.nan))
        return t, s

    def t_field(self, pts):
        return self.invert(pts)[0]


def foliation_beta(model: SubmersionModel, anchor, angle: float, t0: float, t1: float, *,
                   ds: float = 0.01) -> GeodesicPath:
    """Base geodesic ``beta`` through ``anchor`` with chart direction ``angle``, sampled on ``[t0, t1]``."""
    base = model.base
    p = np.asarray(anchor, float)
    v = base.unit_vector(p, angle)
    return geodesic_line(base, p, v, max(-t0, 0.0) + 0.5, max(t1, 0.0) + 0.5, ds=ds)
