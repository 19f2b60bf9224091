"""Plane sections, convexity, tilt and the sweep classifier."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from killsub.base.ideal import oriented_line
from killsub.submersion.model import product_model
from killsub.surfaces.fixtures import entire_convex_graph, geodesic_sphere
from killsub.sweep.classify import Classification, PlaneFoliation, sweep_classify
from killsub.sweep.convexity import Tilt, convexity_check, plane_curvature, tilt_classify
from killsub.sweep.mesh import mesh_for
from killsub.sweep.slicing import IntersectionCurve, VerticalPlane, _distinct, intersect


def make_curve(plane, closed):
    plane = np.asarray(plane, float)
    pts = np.column_stack([plane, np.zeros(len(plane))])
    return IntersectionCurve(level=0.0, coords=plane, points=pts, plane=plane, closed=closed,
                             window=not closed, transversality=1.0)


def circle(R, n=200, phase=0.0):
    th = phase + 2 * math.pi * np.arange(n) / n
    return R * np.column_stack([np.cos(th), np.sin(th)])


@given(st.floats(0.05, 5.0), st.integers(40, 400), st.floats(0, 2 * math.pi))
def test_circle_curvature(R, n, phase):
    k = plane_curvature(circle(R, n, phase), True)
    assert np.allclose(k, 1.0 / R, rtol=5e-3)
    assert np.allclose(plane_curvature(circle(R, n, phase)[::-1], True), -1.0 / R, rtol=5e-3)


def test_curvature_ignores_repeated_vertices():
    pts = circle(1.0, 120)
    doubled = np.repeat(pts, 2, axis=0)
    k = plane_curvature(doubled, True)
    assert np.allclose(k, 1.0, rtol=5e-3)


def test_open_arc_curvature():
    th = np.linspace(0.2, 2.0, 150)
    arc = 2.0 * np.column_stack([np.cos(th), np.sin(th)])
    assert np.allclose(plane_curvature(arc, False), 0.5, rtol=5e-3)


def test_convexity_check():
    th = 2 * math.pi * np.arange(300) / 300
    ellipse = np.column_stack([2 * np.cos(th), np.sin(th)])
    rep = convexity_check(None, make_curve(ellipse, True))
    assert rep.passed and rep.sign == 1 and rep.sign_changes == 0
    # [DERIVED] minimum curvature of the ellipse with semi-axes 2, 1 is b / a^2 = 1/4
    assert rep.margin == pytest.approx(0.25, rel=1e-2)
    r = 1 + 0.3 * np.cos(5 * th)
    flower = np.column_stack([r * np.cos(th), r * np.sin(th)])
    bad = convexity_check(None, make_curve(flower, True))
    assert not bad.passed and bad.sign_changes >= 2


def test_distinct_drops_coincident_crossings():
    pts = np.array([[0.0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 1e-15]])
    assert list(_distinct(np.arange(5), pts, True)) == [0, 2, 3]
    assert list(_distinct(np.arange(5), pts, False)) == [0, 2, 3, 4]


def test_tilt_of_open_sections():
    x = np.linspace(-1.0, 1.0, 201)
    cup = make_curve(np.column_stack([x, x * x]), False)
    rep = tilt_classify(cup)
    assert rep.classification is Tilt.UNTILTED and rep.direction == 1
    slanted = make_curve(np.column_stack([x, 3 * x + x * x]), False)
    assert tilt_classify(slanted).classification is Tilt.TILTED
    ring = make_curve(circle(1.0), True)
    assert tilt_classify(ring).classification is Tilt.NOT_APPLICABLE


def test_section_through_mesh_vertex_is_resolved():
    model = product_model()
    sph = geodesic_sphere(model, [0.2, 0.1, 0.3], 1.0)
    mesh = mesh_for(sph)
    v = mesh.points[len(mesh.points) // 3]
    plane = VerticalPlane(oriented_line(model.base, v[:2], 0.4, reach=6.0))
    curves = intersect(model, sph, plane, mesh=mesh)
    assert len(curves) == 1 and curves[0].closed
    seg = np.linalg.norm(np.diff(curves[0].points, axis=0), axis=1)
    assert np.min(seg) > 0
    assert convexity_check(model, curves[0]).passed


def test_sweep_small_sphere():
    model = product_model()
    sph = geodesic_sphere(model, [0.2, 0.1, 0.3], 0.5)
    fol = PlaneFoliation.uniform(model, (0.2, 0.1), 0.3, -0.8, 0.8, 0.1)
    rep = sweep_classify(model, sph, fol)
    assert rep.classification is Classification.SPHERE
    assert sweep_classify(model, sph, fol.refined(model)).classification is Classification.SPHERE


def test_sweep_convex_graph():
    model = product_model()
    surf = entire_convex_graph(model)
    fol = PlaneFoliation.uniform(model, (0.0, 0.0), 0.0, -3.0, 3.0, 0.1)
    rep = sweep_classify(model, surf, fol)
    assert rep.classification is Classification.GRAPH
    assert rep.stage == 0
    assert rep.find("projection_convex")[-1]["ok"]


def test_foliation_refinement_halves_step():
    model = product_model()
    fol = PlaneFoliation.uniform(model, (0.0, 0.0), 0.0, -1.0, 1.0, 0.2)
    fine = fol.refined(model)
    assert fine.step == pytest.approx(0.1)
    assert len(fine.t_grid) == 2 * len(fol.t_grid) - 1
    with pytest.raises(ValueError):
        PlaneFoliation.through(model, (0.0, 0.0), 0.0, [0.0, 0.0])
