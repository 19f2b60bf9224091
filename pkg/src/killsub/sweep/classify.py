"""Oriented vertical-plane sweep and topological classification of convex surfaces.

Stage 0 scans the angle function: a surface whose normal is never
horizontal is a Killing graph, and the sweep only certifies that its
projection is injective with convex image.  Otherwise the planes
``P_beta(t)`` orthogonal to a base geodesic ``beta`` sweep the surface.
The component born at the first touching point is tracked through the
slices:

* born and dying at interior slices, compact throughout  ->  Sphere;
* compact throughout, alive at one end of the t-grid      ->  simple end
  (Case A), angle from the boundary angles of the last sections;
* non-compact at some slice ``t_bar``                     ->  Case B:
  the tilt of ``C(t_bar)`` and the single escape point are logged, and a
  secondary sweep by planes over a rotating family of ideal geodesics
  avoiding the escape point must produce compact sections only.

Tracking uses band connectivity: two consecutive sections are linked
through the connected components of the mesh triangles whose field range
meets the band between the two levels.  A band component holding more than
one curve of either slice (merge or split) makes the run Inconclusive.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..base.geodesic import GeodesicPath, connect, wrap_angle
from ..base.ideal import ideal_point
from ..errors import GeometryError, InsufficientExtent, WindowTooSmall
from ..submersion.model import SubmersionModel
from ..tolerances import DEFAULT, Tolerances
from .convexity import convexity_check, tilt_classify
from .ends import (angular_extent, horizontal_normal_points, probe_sections, rotating_family,
                   simple_end_test, vertex_angle_function, view_angles)
from .fermi import FermiChart, foliation_beta
from .mesh import SurfaceMesh, mesh_for
from .slicing import FermiField, Section, extract_level_set

NU_MARGIN = 1e-6
WORKERS_ENV = "KILLSUB_WORKERS"


class Classification(str, Enum):
    SPHERE = "Sphere"
    GRAPH = "PlaneKillingGraph"
    SIMPLE_END = "PlaneSimpleEnd"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class PlaneFoliation:
    """Planes ``P_beta(t)`` over the geodesics orthogonal to ``beta`` at ``beta(t)``."""

    anchor: tuple
    angle: float
    t_grid: np.ndarray
    beta: GeodesicPath = field(repr=False, default=None)

    @classmethod
    def through(cls, model: SubmersionModel, anchor, angle: float, t_grid) -> "PlaneFoliation":
        t_grid = np.asarray(t_grid, float)
        if len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
            raise ValueError("t_grid must be strictly increasing with at least two values")
        beta = foliation_beta(model, anchor, angle, t_grid[0] - 1.0, t_grid[-1] + 1.0)
        return cls(tuple(float(a) for a in anchor), float(angle), t_grid, beta)

    @classmethod
    def uniform(cls, model, anchor, angle, t0, t1, step) -> "PlaneFoliation":
        n = int(round((t1 - t0) / step)) + 1
        return cls.through(model, anchor, angle, t0 + step * np.arange(n))

    @property
    def step(self) -> float:
        return float(np.min(np.diff(self.t_grid)))

    def refined(self, model: SubmersionModel) -> "PlaneFoliation":
        """Same foliation, t-grid step halved."""
        t = self.t_grid
        mid = 0.5 * (t[:-1] + t[1:])
        grid = np.empty(2 * len(t) - 1)
        grid[0::2], grid[1::2] = t, mid
        return PlaneFoliation(self.anchor, self.angle, grid, self.beta)

    def reversed(self, model: SubmersionModel) -> "PlaneFoliation":
        return PlaneFoliation.through(model, self.anchor, self.angle + math.pi, -self.t_grid[::-1])

    def as_dict(self) -> dict:
        return {"anchor": list(self.anchor), "angle": self.angle, "t0": float(self.t_grid[0]),
                "t1": float(self.t_grid[-1]), "n": int(len(self.t_grid))}


@dataclass
class SliceRecord:
    t: float
    level: float
    n_components: int
    compact: list
    diameters: list
    min_transversality: float
    skipped: bool = False

    def as_dict(self) -> dict:
        return {"t": self.t, "level": self.level, "n_components": self.n_components,
                "compact": self.compact, "diameters": self.diameters,
                "min_transversality": self.min_transversality, "skipped": self.skipped}


@dataclass
class SweepReport:
    classification: Classification
    stage: int
    slices: list = field(default_factory=list)
    horizontal_normal_points: int = 0
    end_angle: float | None = None
    evidence: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def log(self, check: str, ok: bool | None, **data) -> None:
        self.evidence.append({"check": check, "ok": ok, **data})

    def find(self, check: str) -> list:
        return [e for e in self.evidence if e["check"] == check]

    def as_dict(self) -> dict:
        return {"classification": self.classification.value, "stage": self.stage,
                "slices": [s.as_dict() for s in self.slices],
                "horizontal_normal_points": self.horizontal_normal_points,
                "end_angle": self.end_angle, "evidence": self.evidence, "details": self.details}


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Stage 0: Killing graphs


def _point_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0:1], pts[:, 1:2]
    a, b = poly, np.roll(poly, -1, axis=0)
    cond = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return (np.count_nonzero(cond & (x < xc), axis=1) % 2) == 1


def _distance_to_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a, b = poly, np.roll(poly, -1, axis=0)
    ab = b - a
    w = pts[:, None, :] - a[None]
    lam = np.clip(np.einsum("nkj,kj->nk", w, ab) / np.einsum("kj,kj->k", ab, ab), 0, 1)
    d = w - lam[..., None] * ab[None]
    return np.min(np.linalg.norm(d, axis=-1), axis=1)


def _polygon_is_simple(poly: np.ndarray) -> bool:
    a, b = poly, np.roll(poly, -1, axis=0)
    n = len(poly)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    for i in range(n):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if len(j) == 0:
            continue
        o1 = orient(a[i], b[i], a[j])
        o2 = orient(a[i], b[i], b[j])
        o3 = orient(a[j], b[j], a[i])
        o4 = orient(a[j], b[j], b[i])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return False
    return True


def graph_projection_checks(model: SubmersionModel, mesh: SurfaceMesh, report: SweepReport, *,
                            n_pairs: int = 16, seed: int = 0, tol: Tolerances = DEFAULT) -> bool:
    """Injectivity of the projection on samples and convexity of its image."""
    xy = mesh.points[:, :2]
    T = xy[mesh.triangles]
    area = 0.5 * ((T[:, 1, 0] - T[:, 0, 0]) * (T[:, 2, 1] - T[:, 0, 1])
                  - (T[:, 1, 1] - T[:, 0, 1]) * (T[:, 2, 0] - T[:, 0, 0]))
    consistent = bool(np.all(area > 0) or np.all(area < 0))
    loop = mesh.boundary_loop()
    closed_loop = len(loop) == int(np.count_nonzero(mesh.boundary_edge))
    poly = xy[loop]
    simple = bool(closed_loop and _polygon_is_simple(poly))
    injective = consistent and simple
    report.log("projection_injective", injective, triangles_same_orientation=consistent,
               boundary_simple=simple, n_triangles=int(len(area)))
    if not injective:
        return False
    rng = np.random.default_rng(seed)
    # chords only need their trace: validate at the geometric tolerance
    chord_tol = replace(tol, integration=tol.geometric)
    step = float(np.max(np.linalg.norm(np.diff(np.vstack([poly, poly[:1]]), axis=0), axis=1)))
    worst = 0.0
    for _ in range(n_pairs):
        i, j = rng.choice(len(poly), size=2, replace=False)
        try:
            path, _ = connect(model.base, poly[i], poly[j], tol=chord_tol)
        except GeometryError as exc:
            report.log("projection_convex", False, reason=f"geodesic failed: {exc}")
            return False
        pts = path.points[1:-1]
        outside = ~_point_in_polygon(pts, poly)
        if np.any(outside):
            worst = max(worst, float(np.max(_distance_to_polygon(pts[outside], poly))))
    convex = worst <= 0.5 * step
    report.log("projection_convex", convex, max_excursion=worst, allowance=0.5 * step,
               n_pairs=n_pairs)
    return convex


# ---------------------------------------------------------------------------
# Stage 1: slices and tracking


def _slice(model, mesh, fieldobj, f, level, step, tol) -> tuple:
    """Section at ``level``; nearly tangent planes are moved by half a grid step."""
    for offset in (0.0, 0.5 * step, -0.5 * step):
        sec = extract_level_set(model, mesh, fieldobj, f, level + offset)
        if not sec.curves or sec.min_transversality >= tol.tangency:
            return sec, offset
    return sec, None


class _Bands:
    """Connectivity of mesh triangles between consecutive levels."""

    def __init__(self, mesh: SurfaceMesh, f: np.ndarray):
        ft = f[mesh.triangles]
        valid = np.all(np.isfinite(ft), axis=1)
        self.lo = np.where(valid, np.min(ft, axis=1), np.inf)
        self.hi = np.where(valid, np.max(ft, axis=1), -np.inf)
        m = len(mesh.triangles)
        te = mesh.tri_edges.ravel()
        tri = np.repeat(np.arange(m), 3)
        order = np.argsort(te, kind="stable")
        te, tri = te[order], tri[order]
        same = te[1:] == te[:-1]
        self.pairs = np.stack([tri[:-1][same], tri[1:][same]], -1)
        self.m = m

    def labels(self, a: float, b: float) -> np.ndarray:
        inband = (self.lo <= b) & (self.hi >= a)
        p = self.pairs[inband[self.pairs[:, 0]] & inband[self.pairs[:, 1]]]
        g = coo_matrix((np.ones(len(p)), (p[:, 0], p[:, 1])), shape=(self.m, self.m))
        _, lab = connected_components(g, directed=False)
        return np.where(inband, lab, -1)


@dataclass
class _Track:
    start: str                 # "cap" | "grid"
    end: str                   # "cap" | "grid" | "noncompact"
    first: int
    last: int
    curves: list
    t_bar: int | None = None
    noncompact_curves: list = field(default_factory=list)
    ambiguous: str = ""
    extra_components: int = 0


def _track(sections: list, bands: _Bands, cap: float) -> _Track | None:
    """Follow the component born first through ordered sections."""
    n = len(sections)
    first = next((k for k, s in enumerate(sections) if s is not None and s.curves), None)
    if first is None:
        return None
    sec = sections[first]
    start = "grid" if first == 0 else "cap"
    if len(sec.curves) > 1:
        return _Track(start, "ambiguous", first, first, [], ambiguous="several components are born together")
    cur = sec.curves[0]
    tr = _Track(start, "grid", first, first, [cur])
    if not cur.is_compact(cap):
        tr.end, tr.t_bar, tr.noncompact_curves = "noncompact", first, [cur]
        return tr
    k = first
    while k + 1 < n:
        a, b = sections[k], sections[k + 1]
        if b is None:
            tr.ambiguous = f"slice {k + 1} skipped (persistent tangency)"
            tr.end = "ambiguous"
            return tr
        lab = bands.labels(min(a.level, b.level), max(a.level, b.level))
        comp = lab[cur.triangles[0]]
        mates = [c for c in a.curves if c is not cur and lab[c.triangles[0]] == comp]
        nxt = [c for c in b.curves if lab[c.triangles[0]] == comp]
        if mates:
            tr.end, tr.ambiguous = "ambiguous", f"components merge between slices {k} and {k + 1}"
            return tr
        if not nxt:
            tr.end, tr.last = "cap", k
            return tr
        if any(not c.is_compact(cap) for c in nxt):
            tr.end, tr.t_bar, tr.last, tr.noncompact_curves = "noncompact", k + 1, k + 1, nxt
            return tr
        if len(nxt) > 1:
            tr.end, tr.ambiguous = "ambiguous", f"component splits between slices {k} and {k + 1}"
            return tr
        cur = nxt[0]
        tr.curves.append(cur)
        k += 1
        tr.last = k
    return tr


def _end_angle_case_a(model, curves: list, n_last: int = 5) -> tuple:
    mids, widths = [], []
    for c in curves[-n_last:]:
        w, m = angular_extent(view_angles(model, c.points[:, :2]))
        mids.append(m)
        widths.append(w)
    return mids[-1], mids, widths


def _record(sections, levels, offsets, cap) -> list:
    out = []
    for t, sec, off in zip(levels, sections, offsets):
        if sec is None:
            out.append(SliceRecord(float(t), float("nan"), 0, [], [], float("nan"), skipped=True))
            continue
        out.append(SliceRecord(float(t), float(sec.level), len(sec.curves),
                               [c.is_compact(cap) for c in sec.curves],
                               [float(c.diameter) for c in sec.curves],
                               float(sec.min_transversality)))
    return out


def _chart_reach(model, mesh, foliation) -> float:
    d = model.base.distance_from_basepoint(mesh.points[:, 0], mesh.points[:, 1])
    d0 = float(model.base.distance_from_basepoint(*foliation.anchor))
    return float(np.clip(np.max(d) + d0 + 0.5, 2.0, 8.0))


def sweep_classify(model: SubmersionModel, surface, foliation: PlaneFoliation, *,
                   mesh: SurfaceMesh | None = None, chart: FermiChart | None = None,
                   tol: Tolerances = DEFAULT, diameter_cap: float = 50.0,
                   chart_margin: float = 0.5, chart_reach: float | None = None,
                   delta0: float = 0.3, n_secondary: int = 8, workers: int | None = None,
                   seed: int = 0) -> SweepReport:
    """Classify ``surface`` as Sphere, PlaneKillingGraph, PlaneSimpleEnd or Inconclusive."""
    mesh = mesh_for(surface) if mesh is None else mesh
    nu = vertex_angle_function(model, surface, mesh)
    min_abs = float(np.min(np.abs(nu)))
    one_sign = bool(np.all(nu > 0) or np.all(nu < 0))

    # Stage 0 --------------------------------------------------------------
    if min_abs > NU_MARGIN and one_sign:
        rep = SweepReport(Classification.GRAPH, stage=0)
        rep.log("angle_function_nonvanishing", True, min_abs_nu=min_abs)
        ok = graph_projection_checks(model, mesh, rep, seed=seed, tol=tol)
        if not ok:
            rep.classification = Classification.INCONCLUSIVE
        return rep

    rep = SweepReport(Classification.INCONCLUSIVE, stage=1)
    hnp = horizontal_normal_points(model, surface, mesh, nu=nu)
    rep.horizontal_normal_points = int(len(hnp))
    rep.log("angle_function_vanishes", True, min_abs_nu=min_abs, n_points=int(len(hnp)))

    # Stage 1 --------------------------------------------------------------
    t = foliation.t_grid
    step = foliation.step
    if chart is None:
        reach = _chart_reach(model, mesh, foliation) if chart_reach is None else chart_reach
        chart = FermiChart(model, foliation.beta, t[0] - chart_margin, t[-1] + chart_margin, reach=reach)
    fieldobj = FermiField(chart)
    f = fieldobj.evaluate(mesh.points)[0]
    with ThreadPoolExecutor(max_workers=_worker_count(workers)) as pool:
        results = list(pool.map(lambda lv: _slice(model, mesh, fieldobj, f, lv, step, tol), t))
    sections = [sec if off is not None else None for sec, off in results]
    offsets = [off for _, off in results]
    for tk, off in zip(t, offsets):
        if off is None:
            rep.log("tangency_skip", False, t=float(tk))
        elif off != 0.0:
            rep.log("tangency_perturbed", True, t=float(tk), offset=float(off))
    rep.slices = _record(sections, t, offsets, diameter_cap)
    bands = _Bands(mesh, f)

    tr = _track(sections, bands, diameter_cap)
    if tr is None:
        rep.log("sweep_meets_surface", False)
        return rep
    direction = "forward"
    if tr.start == "grid" and tr.end != "noncompact":
        back = _track(sections[::-1], bands, diameter_cap)
        if back is not None and back.start == "cap":
            tr, direction = back, "backward"
    rep.details["track"] = {"direction": direction, "start": tr.start, "end": tr.end,
                            "first": tr.first, "last": tr.last}
    order = t if direction == "forward" else t[::-1]
    if tr.ambiguous:
        rep.log("component_tracking", False, reason=tr.ambiguous)
        return rep
    rep.log("component_tracking", True, start=tr.start, end=tr.end, n_slices=len(tr.curves))

    # convexity of every tracked compact section (Prop.: strictly convex curves)
    conv = [convexity_check(model, c) for c in tr.curves]
    rep.log("tracked_sections_convex", all(r.passed for r in conv),
            min_margin=min((r.margin for r in conv), default=float("nan")))

    n_total = sum(len(s.curves) for s in sections if s is not None)
    others = n_total - len(tr.curves) - len(tr.noncompact_curves)

    if tr.start == "cap" and tr.end == "cap":
        if others:
            rep.log("single_component", False, extra_curves=others)
            return rep
        rep.log("single_component", True)
        rep.classification = Classification.SPHERE
        rep.details["born"] = float(order[tr.first])
        rep.details["died"] = float(order[tr.last])
        return rep

    if tr.start == "cap" and tr.end == "grid":
        return _case_a(model, surface, mesh, tr, rep, tol, diameter_cap)

    if tr.start == "cap" and tr.end == "noncompact":
        return _case_b(model, surface, mesh, chart, tr, order, rep, tol, diameter_cap,
                       delta0, n_secondary)

    rep.log("sweep_pattern", False, start=tr.start, end=tr.end)
    return rep


def _case_a(model, surface, mesh, tr, rep, tol, cap) -> SweepReport:
    est, mids, widths = _end_angle_case_a(model, tr.curves)
    rep.log("case_a_boundary_angles", True, midpoints=mids, widths=widths)
    try:
        se = simple_end_test(model, surface, mesh, tol=tol, diameter_cap=cap)
    except InsufficientExtent as exc:
        rep.log("simple_end_test", False, reason=str(exc))
        return rep
    agree = bool(se.passed and abs(wrap_angle(se.theta0 - est)) < 0.1)
    rep.log("simple_end_test", se.passed, theta0=se.theta0, spread=se.spread_half,
            agrees_with_sections=agree)
    rep.details["simple_end"] = se.as_dict()
    if agree:
        rep.classification = Classification.SIMPLE_END
        rep.end_angle = float(est)
    return rep


def _case_b(model, surface, mesh, chart, tr, order, rep, tol, cap, delta0, n_secondary):
    t_bar = float(order[tr.t_bar])
    pieces = tr.noncompact_curves
    rep.details["t_bar"] = t_bar
    # Claim 1: the first non-compact section is tilted
    tilts = []
    for c in pieces:
        if c.closed:
            tilts.append("closed")
            continue
        try:
            tilts.append(tilt_classify(c).classification.value)
        except WindowTooSmall as exc:
            tilts.append(f"WindowTooSmall: {exc}")
    rep.log("claim1_first_noncompact_section_tilted", all(s == "Tilted" for s in tilts),
            t_bar=t_bar, tilt=tilts)
    # Claim 2: the section escapes towards a single end of its leaf
    ends_s = []
    for c in pieces:
        if not c.closed:
            _, s_end = chart.invert(c.points[[0, -1], :2])
            ends_s.extend(np.sign(s_end[np.isfinite(s_end)]).tolist())
    one_side = len(set(ends_s)) == 1 if ends_s else False
    theta_esc = None
    if one_side:
        base = model.base
        lev = pieces[0].level
        p = chart.point(np.array([lev]), np.array([0.0]))[0]
        v = np.array([chart._x.ev(lev, 0.0, dy=1), chart._y.ev(lev, 0.0, dy=1)])
        theta_esc = ideal_point(base, p, ends_s[0] * v, tol).angle
    rep.log("claim2_single_escape_point", one_side, escape_angle=theta_esc, end_signs=ends_s)
    if not one_side:
        return rep
    # secondary sweep around the far-sample estimate of the end
    try:
        se = simple_end_test(model, surface, mesh, tol=tol, diameter_cap=cap, n_probe=0)
    except InsufficientExtent as exc:
        rep.log("end_estimate", False, reason=str(exc))
        return rep
    center = se.theta0
    near = bool(se.part_i and abs(wrap_angle(center - theta_esc)) < delta0)
    rep.log("end_estimate", near, theta0=center, spread=se.spread_half,
            distance_to_escape=float(abs(wrap_angle(center - theta_esc))))
    if not near:
        return rep
    try:
        family = rotating_family(model, center, delta0, n_secondary, tol)
    except GeometryError as exc:
        rep.log("secondary_sweep", False, reason=str(exc))
        return rep
    probes = probe_sections(model, surface, mesh, family, diameter_cap=cap, tol=tol)
    ok = all(p.compact for p in probes)
    rep.log("secondary_sweep", ok, delta0=delta0, probes=[p.as_dict() for p in probes])
    if ok:
        rep.classification = Classification.SIMPLE_END
        rep.end_angle = float(center)
    return rep
