"""Scenario runners: one function per command kind.

Each runner receives a :class:`Context` and returns its checks, evidence
and CSV tables through the :class:`RunReport` it fills in.  Random inputs
come only from ``ctx.rng`` so that a fixed seed reproduces every number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..base.comparison import count_local_minima, distance_profile, foot_of_perpendicular, triangle_checks
from ..base.foliation import foliation_from_infinity, foliation_orthogonal, leaf_separation
from ..base.geodesic import geodesic_line, geodesic_trace, shoot, wrap_angle
from ..base.ideal import oriented_line
from ..base.models import PoincareDisk
from ..errors import TangencySuspected
from ..submersion.connection import compute_tau, curvature_sample
from ..submersion.model import SubmersionModel, random_points
from ..surfaces.curves import curve_from_curvature, random_curvature_profile
from ..surfaces.fixtures import cylinder_geometry, vertical_cylinder
from ..surfaces.surface import hypothesis_check
from ..sweep.classify import Classification, PlaneFoliation, sweep_classify
from ..sweep.convexity import convexity_check
from ..sweep.mesh import mesh_for
from ..sweep.slicing import VerticalPlane, intersect
from ..tolerances import Tolerances
from .catalog import default_foliation
from .report import Check, RunReport, Table, compare, equals


@dataclass
class Context:
    model: SubmersionModel
    inputs: dict
    tol: Tolerances
    rng: np.random.Generator
    scale: float = 1.0
    surface: object = None
    surface_spec: dict | None = None
    workers: int = 1

    def thr(self, value: float) -> float:
        """A check threshold under the global tolerance scale."""
        return value * self.scale


def _disk_points(rng, n: int, r_max: float) -> np.ndarray:
    r = r_max * np.sqrt(rng.uniform(0.0, 1.0, n))
    th = rng.uniform(0.0, 2 * math.pi, n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _expected_tau(model: SubmersionModel, p, given):
    if given is not None:
        return float(given)
    if model.analytic_tau is not None:
        return float(model.analytic_tau(float(p[0]), float(p[1])))
    return None


# ---------------------------------------------------------------------------
# verify: bundle-curvature and sectional-curvature identities


VERIFY_CHECKS = ("tau_fit_residual", "frame_agreement", "tau_value", "killing_field",
                 "horizontal_curvature_identity", "vertical_curvature_identity")


def run_verify(ctx: Context, report: RunReport) -> None:
    inp, model = ctx.inputs, ctx.model
    wanted = inp["checks"] or list(VERIFY_CHECKS)
    unknown = sorted(set(wanted) - set(VERIFY_CHECKS))
    if unknown:
        raise ValueError(f"unknown verify check {unknown[0]!r}")
    pts = random_points(model, inp["n_points"], ctx.rng, r_max=inp["r_max"], t_range=inp["t_range"])
    angles = (ctx.rng.uniform(0.0, 2 * math.pi, len(pts)) if inp["random_frames"]
              else np.zeros(len(pts)))
    need_curv = any(c.endswith("identity") for c in wanted)
    tab = Table("points", ["x", "y", "t", "frame_angle", "tau", "tau_x", "tau_y", "fit_residual",
                           "tau_expected", "killing_residual", "K_hor", "K_vert", "res_hor", "res_vert"])
    worst = {k: (-math.inf, None) for k in VERIFY_CHECKS}

    def note(key, value, p):
        if value > worst[key][0]:
            worst[key] = (float(value), [float(c) for c in p])

    for p, ang in zip(pts, angles):
        fit = compute_tau(model, p, ctx.tol, angle=float(ang), strict=False)
        exp = _expected_tau(model, p, inp["expected_tau"])
        kill = model.killing_residual(p)
        kh = kv = r1 = r2 = math.nan
        if need_curv:
            cs = curvature_sample(model, p, ctx.tol, angle=float(ang), strict=False)
            kh, kv, r1, r2 = cs.K_hor, cs.K_vert, cs.res1, cs.res2
            note("horizontal_curvature_identity", r1, p)
            note("vertical_curvature_identity", r2, p)
        note("tau_fit_residual", fit.fit_residual, p)
        note("frame_agreement", fit.agreement, p)
        note("killing_field", kill, p)
        if exp is not None:
            note("tau_value", abs(fit.tau - exp), p)
        tab.add(*p, ang, fit.tau, fit.tau_x, fit.tau_y, fit.fit_residual, exp, kill, kh, kv, r1, r2)
    limits = {"tau_fit_residual": inp["fit_tolerance"], "frame_agreement": inp["frame_tolerance"],
              "tau_value": inp["tau_tolerance"], "killing_field": inp["killing_tolerance"],
              "horizontal_curvature_identity": inp["curvature_tolerance"],
              "vertical_curvature_identity": inp["curvature_tolerance"]}
    for name in wanted:
        value, where = worst[name]
        if name == "tau_value" and where is None:
            if not inp["checks"]:
                continue  # default check list: nothing to compare against
            report.checks.append(Check(name, False, None, limits[name], "<=",
                                       {"reason": "no expected tau (set inputs.expected_tau)"}))
            continue
        report.checks.append(compare(name, value, ctx.thr(limits[name]), model=model.name,
                                     worst_point=where))
    report.evidence["tau_mean"] = float(np.mean([r[4] for r in tab.rows]))
    report.tables.append(tab)


# ---------------------------------------------------------------------------
# curvature: sectional curvature values


def run_curvature(ctx: Context, report: RunReport) -> None:
    inp, model = ctx.inputs, ctx.model
    pts = random_points(model, inp["n_points"], ctx.rng, r_max=inp["r_max"], t_range=inp["t_range"])
    angles = ctx.rng.uniform(0.0, 2 * math.pi, len(pts))
    tab = Table("samples", ["x", "y", "t", "frame_angle", "tau", "kappa", "K_hor", "K_vert",
                            "res_hor", "res_vert"])
    samples = []
    for p, ang in zip(pts, angles):
        cs = curvature_sample(model, p, ctx.tol, angle=float(ang), strict=False)
        samples.append(cs)
        tab.add(cs.x, cs.y, cs.t, ang, cs.tau, cs.kappa, cs.K_hor, cs.K_vert, cs.res1, cs.res2)
    kh = np.array([s.K_hor for s in samples])
    kv = np.array([s.K_vert for s in samples])
    tol = ctx.thr(inp["tolerance"])
    report.checks.append(compare("horizontal_curvature_identity", max(s.res1 for s in samples), tol))
    report.checks.append(compare("vertical_curvature_identity", max(s.res2 for s in samples), tol))
    if inp["expected_horizontal"] is not None:
        report.checks.append(compare("horizontal_curvature_value",
                                     np.max(np.abs(kh - inp["expected_horizontal"])), tol,
                                     expected=inp["expected_horizontal"]))
    if inp["expected_vertical"] is not None:
        report.checks.append(compare("vertical_curvature_value",
                                     np.max(np.abs(kv - inp["expected_vertical"])), tol,
                                     expected=inp["expected_vertical"]))
    report.evidence.update(K_hor_mean=float(np.mean(kh)), K_vert_mean=float(np.mean(kv)),
                           K_hor_range=[float(kh.min()), float(kh.max())],
                           K_vert_range=[float(kv.min()), float(kv.max())])
    report.tables.append(tab)


# ---------------------------------------------------------------------------
# geodesic: comparison triangles and closed-form distances


def poincare_distance(a: float, p, q) -> float:
    """Closed-form distance on the disk of curvature ``-a**2``."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    d2 = float(np.sum((p - q) ** 2))
    return math.acosh(1.0 + 2.0 * d2 / ((1.0 - p @ p) * (1.0 - q @ q))) / a


def run_geodesic(ctx: Context, report: RunReport) -> None:
    inp, base = ctx.inputs, ctx.model.base
    tri = Table("triangles", ["px", "py", "qx", "qy", "rx", "ry", "a", "b", "c", "alpha", "beta",
                              "gamma", "slack_cosines", "slack_double", "slack_angle_sum"])
    n = inp["n_triangles"]
    while len(tri.rows) < n:
        P = _disk_points(ctx.rng, 3, inp["r_max"])
        if min(np.linalg.norm(P[0] - P[1]), np.linalg.norm(P[0] - P[2]),
               np.linalg.norm(P[1] - P[2])) < 1e-3:
            continue
        r = triangle_checks(base, P[0], P[1], P[2], ctx.tol)
        tri.add(*P.ravel(), r.a, r.b, r.c, r.alpha, r.beta, r.gamma,
                r.slack_cosines, r.slack_double, r.slack_angle_sum)
    if n:
        rows = np.array(tri.rows, float)
        lim = -ctx.thr(inp["slack_tolerance"])
        for name, col in (("law_of_cosines_slack", 12), ("double_law_slack", 13),
                          ("angle_sum_slack", 14)):
            k = int(np.argmin(rows[:, col]))
            report.checks.append(compare(name, rows[k, col], lim, ">=", n_triangles=n,
                                         worst_triangle=rows[k, :6].tolist()))
    report.tables.append(tri)
    if isinstance(base, PoincareDisk) and inp["n_distance_pairs"]:
        dist = Table("distances", ["px", "py", "qx", "qy", "shooting", "closed_form", "error"])
        for _ in range(inp["n_distance_pairs"]):
            P = _disk_points(ctx.rng, 2, inp["r_max"])
            if np.linalg.norm(P[0] - P[1]) < 1e-3:
                continue
            d_num = shoot(base, P[0], P[1], ctx.tol).length
            d_ref = poincare_distance(base.a, P[0], P[1])
            dist.add(*P.ravel(), d_num, d_ref, abs(d_num - d_ref))
        err = max(r[-1] for r in dist.rows)
        report.checks.append(compare("closed_form_distance", err, ctx.thr(inp["distance_tolerance"]),
                                     n_pairs=len(dist.rows)))
        report.tables.append(dist)


# ---------------------------------------------------------------------------
# foliate: disjoint leaves and perpendicular feet


def run_foliate(ctx: Context, report: RunReport) -> None:
    inp, base = ctx.inputs, ctx.model.base
    n = inp["n_leaves"]
    anchor = np.asarray(inp["anchor"], float)
    if inp["kind"] == "orthogonal":
        sr = inp["s_range"]
        alpha = geodesic_line(base, anchor, base.unit_vector(anchor, inp["angle"]), sr + 1.0, sr + 1.0)
        params = np.linspace(-sr, sr, n)
        leaves = foliation_orthogonal(base, alpha, params)
        targets = [alpha] * inp["n_feet"]
    else:
        x0 = inp["ideal_point"]
        w = inp["arc_half_width"]
        params = x0 + math.pi + np.linspace(-w, w, n)
        leaves = foliation_from_infinity(base, x0, params, ctx.tol)
        targets = []
        for k in ctx.rng.integers(0, n, inp["n_feet"]):
            # the stretch of the leaf near o; the far samples hug the chart edge
            path = leaves[int(k)].path
            j = int(np.argmin(np.linalg.norm(path.points, axis=1)))
            targets.append(geodesic_line(base, path.points[j], path.velocities[j],
                                         inp["s_range"] + 1.0, inp["s_range"] + 1.0))
    sep = leaf_separation(base, leaves, window=inp["window"])
    report.checks.append(Check("leaves_disjoint", sep.passed, sep.min_margin, sep.threshold, ">",
                               {"closest_pair": list(sep.closest_pair), "n_leaves": sep.n_leaves}))
    leaf_tab = Table("leaves", ["index", "parameter"])
    for i, prm in enumerate(params):
        leaf_tab.add(i, prm)
    feet = Table("feet", ["px", "py", "foot_x", "foot_y", "s", "distance", "orthogonality",
                          "scan_minima", "scan_argmin_s"])
    for alpha in targets:
        while True:
            p = _disk_points(ctx.rng, 1, 0.6)[0]
            if np.min(np.linalg.norm(alpha.points - p, axis=1)) > 0.05:
                break
        foot = foot_of_perpendicular(base, alpha, p, ctx.tol)
        ss, d = distance_profile(base, alpha, p, n=inp["scan_points"], tol=ctx.tol)
        feet.add(*p, *foot.point, foot.s, foot.distance, foot.orthogonality,
                 count_local_minima(d), ss[int(np.argmin(d))])
    if feet.rows:
        rows = np.array(feet.rows, float)
        report.checks.append(compare("feet_orthogonal", np.max(rows[:, 6]),
                                     ctx.thr(inp["orthogonality_tolerance"]), n_feet=len(rows)))
        spacing = (targets[0].s_max - targets[0].s_min) / (inp["scan_points"] - 1)
        unique = bool(np.all(rows[:, 7] == 1) and np.all(np.abs(rows[:, 8] - rows[:, 4]) <= 2 * spacing))
        report.checks.append(Check("feet_unique", unique, float(np.max(rows[:, 7])), 1.0, "==",
                                   {"scan_points": inp["scan_points"]}))
    report.evidence["min_leaf_margin"] = sep.min_margin
    report.tables += [leaf_tab, feet]


# ---------------------------------------------------------------------------
# cylinder: second fundamental form of vertical cylinders


def run_cylinder(ctx: Context, report: RunReport) -> None:
    inp, model = ctx.inputs, ctx.model
    base = model.base
    L = inp["curve_length"]
    tab = Table("samples", ["curve", "s", "t", "kg", "tau", "II_11", "II_12", "II_22", "H", "K", "Ke",
                            "II_error"])
    errs, h_err, k_abs, ke_err, ke_vals, ii_max = [], [], [], [], [], []
    last = None
    for i in range(inp["n_curves"]):
        p0 = _disk_points(ctx.rng, 1, 0.5)[0]
        a0 = float(ctx.rng.uniform(0.0, 2 * math.pi))
        if inp["plane"]:
            curve = geodesic_trace(base, p0, base.unit_vector(p0, a0), L)

            def kg(s):
                return 0.0
        else:
            kg, _ = random_curvature_profile(ctx.rng, inp["curvature_scale"])
            curve = curve_from_curvature(base, p0, a0, kg, L)
        cyl = vertical_cylinder(model, curve)
        last = cyl
        s = float(ctx.rng.uniform(0.2 * L, 0.8 * L))
        t = float(ctx.rng.uniform(-0.8, 0.8))
        g = cylinder_geometry(model, cyl, s, t, ctx.tol)
        P = g["point"]
        tau = _expected_tau(model, P, None)
        tau = g["tau"] if tau is None else tau
        k = kg(s)
        oracle = np.array([[0.0, -tau], [-tau, k]])
        II = g["II"]
        e = float(np.max(np.abs(II - oracle)))
        errs.append(e)
        h_err.append(abs(g["H"] - 0.5 * k))
        k_abs.append(abs(g["K"]))
        ke_err.append(abs(g["Ke"] + tau * tau))
        ke_vals.append(g["Ke"])
        ii_max.append(float(np.max(np.abs(II))))
        tab.add(i, s, t, k, tau, II[0, 0], II[0, 1], II[1, 1], g["H"], g["K"], g["Ke"], e)
    tol = ctx.thr(inp["tolerance"])
    report.checks.append(compare("second_fundamental_form", max(errs), tol, n_curves=len(errs)))
    report.checks.append(compare("mean_curvature_half_kg", max(h_err), tol))
    report.checks.append(compare("intrinsic_curvature_zero", max(k_abs), tol))
    report.checks.append(compare("extrinsic_curvature_minus_tau2", max(ke_err), tol))
    report.evidence["Ke_mean"] = float(np.mean(ke_vals))
    report.evidence["Ke_range"] = [float(min(ke_vals)), float(max(ke_vals))]
    if inp["plane"] and all(abs(r[4]) == 0.0 for r in tab.rows):
        report.checks.append(compare("totally_geodesic_plane", max(ii_max),
                                     ctx.thr(inp["plane_tolerance"])))
    if inp["hypothesis"] and last is not None:
        surf = last.surface
        m = int(math.ceil(math.sqrt(inp["hypothesis_samples"])))
        uu, vv = np.meshgrid(np.linspace(*surf.u_range, m + 2)[1:-1],
                             np.linspace(*surf.v_range, m + 2)[1:-1], indexing="ij")
        hyp = hypothesis_check(model, surf, uu.ravel(), vv.ravel())
        ok = (not hyp.passed) and abs(hyp.margin) <= ctx.thr(inp["plane_tolerance"])
        report.checks.append(Check("hypothesis_rejects_cylinder", bool(ok), hyp.margin,
                                   ctx.thr(inp["plane_tolerance"]), "|.|<=",
                                   {"hypothesis_passed": hyp.passed, "n_samples": hyp.n_samples}))
    report.tables.append(tab)


# ---------------------------------------------------------------------------
# sweep: classification of convex surfaces


def _foliation_params(ctx: Context) -> dict:
    spec = ctx.inputs["foliation"]
    out = default_foliation(ctx.surface, ctx.surface_spec)
    for key in ("anchor", "t0", "t1"):
        if spec.get(key) is not None:
            out[key] = spec[key]
    out["angle"], out["step"] = spec["angle"], spec["step"]
    return out


def _slice_rows(tab: Table, tag: str, angle: float, rep) -> None:
    for s in rep.slices:
        tab.add(tag, angle, s.t, s.level, s.n_components, all(s.compact) if s.compact else None,
                max(s.diameters) if s.diameters else None, s.min_transversality, s.skipped)


def _sweep_summary(rep) -> dict:
    return {"classification": rep.classification.value, "stage": rep.stage, "end_angle": rep.end_angle,
            "horizontal_normal_points": rep.horizontal_normal_points, "evidence": rep.evidence,
            "details": {k: v for k, v in rep.details.items() if k != "simple_end"}}


MIN_SECTION_POINTS = 16
SECTION_REFINE = 4


def _random_sections(ctx: Context, mesh, report: RunReport) -> None:
    model, surface = ctx.model, ctx.surface
    n = ctx.inputs["random_sections"]
    tab = Table("sections", ["plane", "x", "y", "angle", "curve", "closed", "n_points", "passed",
                             "margin", "sign", "sign_changes"])
    done, tangent, worst, all_ok = 0, 0, math.inf, True
    fine = None
    while done < n:
        # anchor at a random interior point of a random triangle (never a vertex)
        tri = mesh.points[mesh.triangles[int(ctx.rng.integers(len(mesh.triangles)))], :2]
        bary = ctx.rng.dirichlet(np.ones(3))
        p = bary @ tri
        ang = float(ctx.rng.uniform(0.0, math.pi))
        try:
            plane = VerticalPlane(oriented_line(model.base, p, ang, reach=6.0, tol=ctx.tol))
            curves = intersect(model, surface, plane, mesh=mesh, tol=ctx.tol)
            if any(len(c.points) < MIN_SECTION_POINTS for c in curves):
                # small caps are cut by only a few triangles: re-cut on a finer mesh
                if fine is None:
                    fine = mesh_for(surface, surface.grid_step / SECTION_REFINE)
                curves = intersect(model, surface, plane, mesh=fine, tol=ctx.tol)
        except TangencySuspected:
            tangent += 1
            if tangent > 5 * n:
                raise
            continue
        for j, c in enumerate(curves):
            r = convexity_check(model, c)
            all_ok &= r.passed
            worst = min(worst, r.margin if r.passed else -r.margin)
            tab.add(done, p[0], p[1], ang, j, c.closed, len(c.points), r.passed, r.margin, r.sign,
                    r.sign_changes)
        done += 1
    report.checks.append(Check("sections_strictly_convex", bool(all_ok), worst, 1e-3, ">",
                               {"n_planes": n, "n_curves": len(tab.rows), "tangent_skipped": tangent}))
    report.tables.append(tab)


def run_sweep(ctx: Context, report: RunReport) -> None:
    inp, model, surface = ctx.inputs, ctx.model, ctx.surface
    mesh = mesh_for(surface)
    fp = _foliation_params(ctx)
    directions = inp["directions"] or [fp["angle"]]
    slices = Table("slices", ["grid", "direction", "t", "level", "n_components", "all_compact",
                              "max_diameter", "min_transversality", "skipped"])
    runs = []
    for k, ang in enumerate(directions):
        fol = PlaneFoliation.uniform(model, fp["anchor"], ang, fp["t0"], fp["t1"], fp["step"])
        rep = sweep_classify(model, surface, fol, mesh=mesh, tol=ctx.tol,
                             diameter_cap=inp["diameter_cap"], workers=ctx.workers)
        _slice_rows(slices, "base", ang, rep)
        entry = {"direction": ang, "foliation": fol.as_dict(), "base": _sweep_summary(rep)}
        tag = f"[direction={ang:.4f}]"
        if inp["expected"] is not None:
            report.checks.append(equals("classification" + tag, rep.classification.value, inp["expected"]))
        if rep.classification is Classification.GRAPH or inp["expected"] == Classification.GRAPH.value:
            conv = rep.find("projection_convex")
            ok = bool(conv and conv[-1]["ok"])
            report.checks.append(Check("graph_projection_convex" + tag, ok,
                                       conv[-1].get("max_excursion") if conv else None,
                                       conv[-1].get("allowance") if conv else None, "<="))
        if inp["expected_end_angle"] is not None:
            val = rep.end_angle
            err = abs(wrap_angle(val - inp["expected_end_angle"])) if val is not None else math.inf
            report.checks.append(compare("end_angle" + tag, err, ctx.thr(inp["angle_tolerance"]),
                                         end_angle=val, expected=inp["expected_end_angle"]))
        if inp["refine"]:
            fine = fol.refined(model)
            rep2 = sweep_classify(model, surface, fine, mesh=mesh, tol=ctx.tol,
                                  diameter_cap=inp["diameter_cap"], workers=ctx.workers)
            _slice_rows(slices, "refined", ang, rep2)
            entry["refined"] = _sweep_summary(rep2)
            same = rep2.classification is rep.classification
            da = 0.0
            if rep.end_angle is not None or rep2.end_angle is not None:
                da = (abs(wrap_angle(rep.end_angle - rep2.end_angle))
                      if rep.end_angle is not None and rep2.end_angle is not None else math.inf)
            ok = bool(same and da <= ctx.thr(inp["angle_tolerance"]))
            report.checks.append(Check("refinement_stable" + tag, ok, rep2.classification.value,
                                       rep.classification.value, "==", {"end_angle_change": da}))
        runs.append(entry)
    report.evidence["runs"] = runs
    report.tables.append(slices)
    if inp["random_sections"]:
        _random_sections(ctx, mesh, report)


RUNNERS = {"verify": run_verify, "curvature": run_curvature, "geodesic": run_geodesic,
           "foliate": run_foliate, "cylinder": run_cylinder, "sweep": run_sweep}
