"""Base surfaces: conformal models, geodesics, comparison geometry, foliations."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from killsub.base.comparison import (count_local_minima, distance_profile, foot_of_perpendicular,
                                     triangle_checks)
from killsub.base.foliation import foliation_orthogonal, leaf_separation
from killsub.base.geodesic import angle_at, connect, geodesic_line, geodesic_trace, shoot, wrap_angle
from killsub.base.models import ConformalModel, FlatPlane, PoincareDisk
from killsub.errors import NotStrict, OutOfChart

# [DERIVED] mpmath, 30 digits: arccosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2))) / a
# for p = (0.1, 0.2), q = (-0.3, 0.4)
D_PQ_A1 = 1.01543425653030583522
D_PQ_A2 = 0.50771712826515291761
# [DERIVED] mpmath: interior angle of the equilateral triangle of side 1 in curvature -1,
# acos(cosh 1 / (1 + cosh 1)) from the hyperbolic law of cosines
EQUILATERAL_ANGLE = 0.91879787217802736904

P, Q = np.array([0.1, 0.2]), np.array([-0.3, 0.4])


def closed_form(a, p, q):
    dz2 = float(np.sum((p - q) ** 2))
    return math.acosh(1 + 2 * dz2 / ((1 - p @ p) * (1 - q @ q))) / a


@pytest.mark.parametrize("a, expected", [(1.0, D_PQ_A1), (2.0, D_PQ_A2)])
def test_poincare_distance_frozen(a, expected):
    assert shoot(PoincareDisk(a=a), P, Q).length == pytest.approx(expected, abs=1e-9)


def test_constant_curvature_poincare():
    assert PoincareDisk(a=2.0).gauss_curvature(0.3, -0.2) == pytest.approx(-4.0)
    # the generic finite-difference path agrees with the closed form
    disk = PoincareDisk()
    generic = ConformalModel("disk-fd", lambda x, y: math.log(2.0) - np.log1p(-(x * x + y * y)))
    for x, y in [(0.0, 0.0), (0.3, -0.4), (-0.6, 0.2)]:
        assert generic.gauss_curvature(x, y) == pytest.approx(disk.gauss_curvature(x, y), abs=1e-6)


def test_flat_plane_is_not_strict():
    with pytest.raises(NotStrict):
        FlatPlane().check_strict()


@given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-math.pi, math.pi))
def test_geodesic_matches_exponential_map(x, y, ang):
    disk = PoincareDisk()
    p = np.array([x, y])
    path = geodesic_trace(disk, p, disk.unit_vector(p, ang), 1.2, ds=0.01)
    assert np.max(path.speed_error()) < 1e-8
    exact = disk.exp_points(p, ang, 1.2)
    assert np.allclose(path.end, exact, atol=1e-8)


def test_trace_rejects_non_unit_velocity():
    with pytest.raises(ValueError):
        geodesic_trace(PoincareDisk(), [0.0, 0.0], [1.0, 0.0], 1.0)


def test_shoot_rejects_points_outside_the_disk():
    with pytest.raises(OutOfChart):
        shoot(PoincareDisk(), [0.0, 0.0], [0.8, 0.8])


def test_connect_endpoints_and_length():
    disk = PoincareDisk()
    path, length = connect(disk, P, Q)
    assert np.allclose(path.end, Q, atol=1e-8)
    assert length == pytest.approx(closed_form(1.0, P, Q), abs=1e-9)


def test_geodesic_line_through_origin_is_a_diameter():
    disk = PoincareDisk()
    line = geodesic_line(disk, [0.0, 0.0], [0.5, 0.0], 2.0, 2.0)
    assert np.max(np.abs(line.points[:, 1])) < 1e-12
    assert line.at(2.0)[0] == pytest.approx(math.tanh(1.0), abs=1e-9)


def test_wrap_angle():
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi) or wrap_angle(3 * math.pi) == pytest.approx(-math.pi)
    assert wrap_angle(0.25) == pytest.approx(0.25)
    assert wrap_angle(-2 * math.pi + 0.1) == pytest.approx(0.1)


def test_equilateral_triangle_angles():
    disk = PoincareDisk()
    # circumradius R of an equilateral triangle of side 1: sinh(1/2) = sinh(R) sin(pi/3)
    R = math.asinh(math.sinh(0.5) / math.sin(math.pi / 3))
    pts = disk.exp_points(np.zeros(2), np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3]), np.full(3, R))
    rep = triangle_checks(disk, *pts)
    assert rep.a == pytest.approx(1.0, abs=1e-8)
    assert rep.alpha == pytest.approx(EQUILATERAL_ANGLE, abs=1e-7)
    assert rep.slack_angle_sum == pytest.approx(math.pi - 3 * EQUILATERAL_ANGLE, abs=1e-6)
    assert rep.passed(1e-6)


def test_flat_triangle_has_zero_slack():
    plane = FlatPlane()
    rep = triangle_checks(plane, [0.0, 0.0], [1.0, 0.0], [0.3, 0.8])
    assert abs(rep.slack_cosines) < 1e-8
    assert abs(rep.slack_double) < 1e-8
    assert abs(rep.slack_angle_sum) < 1e-8


disk_points = st.tuples(st.floats(0.0, 0.8), st.floats(-math.pi, math.pi)).map(
    lambda rt: (rt[0] * math.cos(rt[1]), rt[0] * math.sin(rt[1])))


@given(st.lists(disk_points, min_size=3, max_size=3))
def test_comparison_slacks_nonnegative(corners):
    pts = np.array(corners)
    if np.min([np.linalg.norm(pts[i] - pts[j]) for i, j in [(0, 1), (1, 2), (0, 2)]]) < 0.05:
        return
    rep = triangle_checks(PoincareDisk(), *pts)
    assert rep.passed(1e-6)


def test_angle_at_right_angle():
    disk = PoincareDisk()
    # the two axes through the origin are geodesics meeting at a right angle
    assert angle_at(disk, [0.0, 0.0], [0.5, 0.0], [0.0, -0.3]) == pytest.approx(math.pi / 2, abs=1e-9)


def test_foot_on_diameter():
    disk = PoincareDisk()
    alpha = geodesic_line(disk, [0.0, 0.0], [0.5, 0.0], 3.0, 3.0)
    foot = foot_of_perpendicular(disk, alpha, [0.0, 0.5])
    assert np.allclose(foot.point, [0.0, 0.0], atol=1e-6)
    # [DERIVED] d(0, 0.5 i) = 2 artanh(1/2) = log 3
    assert foot.distance == pytest.approx(math.log(3.0), abs=1e-8)
    assert foot.orthogonality < 1e-4
    ss, d = distance_profile(disk, alpha, [0.0, 0.5], n=61)
    assert count_local_minima(d) == 1


def test_count_local_minima():
    assert count_local_minima([3, 2, 1, 2, 3]) == 1
    assert count_local_minima([1, 2, 1, 2, 1]) == 3
    assert count_local_minima([1, 2, 3]) == 1


def test_orthogonal_foliation_disjoint():
    disk = PoincareDisk()
    alpha = geodesic_line(disk, [0.0, 0.0], [0.5, 0.0], 3.0, 3.0)
    leaves = foliation_orthogonal(disk, alpha, np.linspace(-1.5, 1.5, 7), reach=3.0)
    rep = leaf_separation(disk, leaves)
    assert rep.passed
    assert rep.n_leaves == 7
