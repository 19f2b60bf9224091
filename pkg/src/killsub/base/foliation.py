"""Geodesic foliations of the base and a finite disjointness witness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import FoliationCheckFailed
from ..tolerances import DEFAULT, Tolerances
from .geodesic import GeodesicPath
from .ideal import IdealPoint, OrientedGeodesic, _safe_line, ideal_geodesic
from .models import HadamardModel


def normal_direction(path: GeodesicPath, s: float) -> np.ndarray:
    """``J alpha'(s)``: counter-clockwise rotation of the velocity."""
    v = path.velocity_at(s)
    return np.array([-v[1], v[0]])


def foliation_orthogonal(model: HadamardModel, alpha: GeodesicPath, s_grid, *,
                         reach: float = 6.0, ds: float = 0.02) -> list[GeodesicPath]:
    """Geodesics through ``alpha(s)`` orthogonal to ``alpha``, oriented along ``J alpha'``.

    Each leaf is sampled on ``[-reach, reach]`` with parameter 0 on ``alpha``.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be strictly increasing")
    leaves = []
    for s in s_grid:
        p = alpha.at(s)
        n = normal_direction(alpha, s)
        n = n / model.norm(p, n)
        leaves.append(_safe_line(model, p, n, reach, reach, ds))
    return leaves


def foliation_from_infinity(model: HadamardModel, x0, theta_grid, tol: Tolerances = DEFAULT,
                            *, reach: float = 12.0) -> list[OrientedGeodesic]:
    """Leaves ``alpha(x0, y)`` for ``y`` in ``theta_grid``."""
    x0a = x0.angle if isinstance(x0, IdealPoint) else float(x0)
    out = []
    for y in theta_grid:
        ya = y.angle if isinstance(y, IdealPoint) else float(y)
        if abs(math.remainder(ya - x0a, 2 * math.pi)) < tol.angular:
            raise ValueError("x0 must not belong to the grid")
        out.append(ideal_geodesic(model, x0a, ya, tol, reach=reach))
    return out


# ---------------------------------------------------------------------------
# disjointness witness


def _seg_point(p, a, b):
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, axis=-1) / np.maximum(np.sum(ab * ab, axis=-1), 1e-300), 0, 1)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def segment_distance(a0, a1, b0, b1):
    """Euclidean distance between segments (vectorised over leading axes)."""
    d1, d2 = _cross(a1 - a0, b0 - a0), _cross(a1 - a0, b1 - a0)
    d3, d4 = _cross(b1 - b0, a0 - b0), _cross(b1 - b0, a1 - b0)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    d = np.minimum.reduce([_seg_point(a0, b0, b1), _seg_point(a1, b0, b1),
                           _seg_point(b0, a0, a1), _seg_point(b1, a0, a1)])
    return np.where(crossing, 0.0, d)


def _window_mask(model: HadamardModel, pts, radius: float):
    if model.radial_basepoint:
        return model.distance_from_basepoint(pts[:, 0], pts[:, 1]) <= radius
    lam0 = float(model.lam(0.0, 0.0))
    return np.hypot(pts[:, 0], pts[:, 1]) * lam0 <= radius


def polyline_distance(model: HadamardModel, pa, pb, n_candidates: int = 8) -> float:
    """Metric distance between two chart polylines (crossings give 0)."""
    if len(pa) < 2 or len(pb) < 2:
        return math.inf
    tree = cKDTree(pb)
    d, j = tree.query(pa)
    order = np.argsort(d)[:n_candidates]
    best = math.inf
    for i in order:
        ia = np.arange(max(i - 2, 0), min(i + 2, len(pa) - 1))
        jb = np.arange(max(j[i] - 2, 0), min(j[i] + 2, len(pb) - 1))
        A0, A1 = pa[ia][:, None, :], pa[ia + 1][:, None, :]
        B0, B1 = pb[jb][None, :, :], pb[jb + 1][None, :, :]
        dd = segment_distance(A0, A1, B0, B1)
        mid = 0.5 * (pa[i] + pb[j[i]])
        best = min(best, float(np.min(dd)) * float(model.lam(mid[0], mid[1])))
    return best


@dataclass(frozen=True)
class SeparationReport:
    min_margin: float
    closest_pair: tuple[int, int]
    threshold: float
    n_leaves: int

    @property
    def passed(self) -> bool:
        return self.min_margin > self.threshold


def leaf_separation(model: HadamardModel, leaves, *, window: float = 4.0,
                    resolution: float = 1e-6) -> SeparationReport:
    """Minimum pairwise metric distance of leaves inside a metric window around ``o``.

    Disjointness is witnessed when every pair is separated by more than
    ``10 * resolution``.
    """
    polys = []
    for leaf in leaves:
        pts = leaf.path.points if isinstance(leaf, OrientedGeodesic) else leaf.points
        mask = _window_mask(model, pts, window)
        idx = np.flatnonzero(mask)
        polys.append(pts[idx[0]: idx[-1] + 1] if len(idx) else pts[:0])
    best, pair = math.inf, (-1, -1)
    for i, j in itertools.combinations(range(len(polys)), 2):
        d = polyline_distance(model, polys[i], polys[j])
        if d < best:
            best, pair = d, (i, j)
    return SeparationReport(best, pair, 10.0 * resolution, len(leaves))


def require_disjoint(report: SeparationReport) -> SeparationReport:
    if not report.passed:
        raise FoliationCheckFailed(
            f"leaves {report.closest_pair} are {report.min_margin:.3e} apart "
            f"(threshold {report.threshold:.1e})")
    return report
