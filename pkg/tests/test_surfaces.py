"""Surface geometry: cylinders, planes, spheres, the flaring fixture."""

from __future__ import annotations

import math

import numpy as np
import pytest

from killsub.base.geodesic import geodesic_line
from killsub.base.models import PoincareDisk
from killsub.errors import NotUnitSpeed
from killsub.surfaces.curves import curve_from_curvature, geodesic_curvature, hyperbolic_circle
from killsub.surfaces.fixtures import (FlaringSpec, cylinder_geometry, entire_convex_graph,
                                       flaring_principal_curvatures, flaring_surface, geodesic_sphere,
                                       vertical_cylinder, vertical_plane)
from killsub.surfaces.surface import hypothesis_check, surface_geometry
from killsub.submersion.model import e_model, product_model

# [DERIVED] mpmath: geodesic curvature of a circle of radius 0.8 in curvature -1 is coth(0.8)
COTH_08 = 1.50594070204370662123


def test_hyperbolic_circle_curvature():
    circle = hyperbolic_circle(PoincareDisk(), 0.8)
    for s in np.linspace(0.5, circle.s_max - 0.5, 5):
        assert geodesic_curvature(PoincareDisk(), circle, s) == pytest.approx(COTH_08, abs=1e-6)


def test_prescribed_curvature_roundtrip():
    disk = PoincareDisk()
    curve = curve_from_curvature(disk, [0.1, 0.0], 0.3, lambda s: 0.5 + 0.2 * math.sin(s), 1.5)
    for s in (0.3, 0.75, 1.2):
        assert geodesic_curvature(disk, curve, s) == pytest.approx(0.5 + 0.2 * math.sin(s), abs=1e-6)


def test_geodesic_curvature_needs_unit_speed():
    disk = PoincareDisk()
    line = geodesic_line(disk, [0.0, 0.0], [0.5, 0.0], 1.0, 1.0)

    class Scaled:
        s_min, s_max = line.s_min, line.s_max
        at = staticmethod(line.at)

        @staticmethod
        def velocity_at(s):
            return 2.0 * line.velocity_at(s)

    with pytest.raises(NotUnitSpeed):
        geodesic_curvature(disk, Scaled, 0.0)


@pytest.mark.parametrize("tau0", [0.25, 0.5, 1.0])
def test_cylinder_second_fundamental_form(tau0):
    model = e_model(tau0)
    curve = curve_from_curvature(model.base, [0.0, 0.1], 0.4, lambda s: 0.7, 1.5)
    cyl = vertical_cylinder(model, curve)
    geo = cylinder_geometry(model, cyl, 0.75, 0.2)
    # [PAPER] II = [[0, -tau], [-tau, k_g]] in the basis (xi, T)
    expected = np.array([[0.0, -tau0], [-tau0, 0.7]])
    assert np.allclose(geo["II"], expected, atol=1e-5)
    assert geo["H"] == pytest.approx(0.35, abs=1e-5)
    assert geo["Ke"] == pytest.approx(-tau0 ** 2, abs=1e-5)
    assert geo["K"] == pytest.approx(0.0, abs=1e-4)


def test_product_vertical_plane_totally_geodesic():
    model = product_model()
    line = geodesic_line(model.base, [0.1, -0.2], model.base.unit_vector([0.1, -0.2], 0.9), 1.5, 1.5)
    plane = vertical_plane(model, line)
    geo = cylinder_geometry(model, plane, 0.3, -0.4)
    assert np.max(np.abs(geo["II"])) < 1e-6


def test_hypothesis_rejects_vertical_plane():
    model = product_model()
    line = geodesic_line(model.base, [0.0, 0.0], [0.5, 0.0], 1.5, 1.5)
    plane = vertical_plane(model, line)
    u, v = np.meshgrid(np.linspace(-0.5, 0.5, 3), np.linspace(-1.0, 1.0, 5))
    rep = hypothesis_check(model, plane.surface, u.ravel(), v.ravel())
    assert not rep.passed
    assert abs(rep.margin) < 1e-6


def test_sphere_is_strictly_convex():
    model = product_model()
    sph = geodesic_sphere(model, [0.2, 0.1, 0.3], 0.5)
    u, v = sph.sample_params(40)
    g = surface_geometry(model, sph, u, v)
    assert np.all(np.minimum(g.k1, g.k2) > 0)
    # a small sphere is nearly round: principal curvatures close to 1/R
    assert np.allclose(g.k1, 2.0, atol=0.5) and np.allclose(g.k2, 2.0, atol=0.5)
    assert np.allclose(sph.distance_function(g.point), 0.5, atol=1e-10)


def test_flaring_principal_curvatures():
    model = product_model()
    spec = FlaringSpec()
    surf = flaring_surface(model, spec)
    v = np.linspace(-1.5, 1.5, 7)
    g = surface_geometry(model, surf, np.zeros_like(v), v)
    lo, hi = flaring_principal_curvatures(spec, v)
    assert np.allclose(np.sort([g.k1, g.k2], axis=0), [lo, hi], atol=1e-5)


def test_convex_graph_satisfies_hypothesis():
    model = product_model()
    surf = entire_convex_graph(model)
    u, v = np.meshgrid(np.linspace(-0.5, 0.5, 5), np.linspace(-0.5, 0.5, 5))
    assert hypothesis_check(model, surf, u.ravel(), v.ravel()).passed
