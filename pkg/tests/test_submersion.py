"""Killing submersions: bundle curvature, sectional curvatures, fault injection."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from killsub.base.models import PoincareDisk
from killsub.errors import FitFailure
from killsub.submersion.connection import (compute_tau, curvature_sample, frame_report, nabla_xi,
                                           wedge)
from killsub.submersion.flow import flow_isometry_residual
from killsub.submersion.model import (e_model, model_from_omega_expressions, mutated, product_model,
                                      random_points)

coords = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(-4.0, 4.0)).filter(
    lambda p: p[0] ** 2 + p[1] ** 2 < 0.81)


@given(coords, st.sampled_from([0.25, 0.5, 1.0]))
def test_tau_recovered_on_homogeneous_models(p, tau0):
    fit = compute_tau(e_model(tau0), np.array(p))
    assert fit.tau == pytest.approx(tau0, abs=1e-6)
    assert fit.fit_residual < 1e-6
    assert fit.agreement < 1e-6


@given(coords)
def test_product_has_zero_tau(p):
    fit = compute_tau(product_model(), np.array(p))
    assert abs(fit.tau) < 1e-8


@given(coords, st.floats(0.0, 2 * np.pi))
def test_tau_independent_of_frame(p, angle):
    model = e_model(0.5)
    a = compute_tau(model, np.array(p)).tau
    b = compute_tau(model, np.array(p), angle=angle).tau
    assert a == pytest.approx(b, abs=1e-7)


def test_nabla_xi_matches_wedge():
    model = e_model(0.5)
    p = np.array([0.2, -0.3, 0.7])
    X, Y, xi = model.frame(p)
    lhs = nabla_xi(model, p, X)
    rhs = 0.5 * wedge(model, p, X, xi)
    assert np.allclose(lhs, rhs, atol=1e-7)


@pytest.mark.parametrize("tau0", [0.25, 0.5, 1.0])
def test_curvature_identities(tau0):
    model = e_model(tau0)
    for p in random_points(model, 5, np.random.default_rng(1), r_max=0.7):
        s = curvature_sample(model, p)
        # [PAPER] horizontal planes: kappa - 3 tau^2, vertical planes: tau^2
        assert s.K_hor == pytest.approx(-1.0 - 3 * tau0 ** 2, abs=1e-4)
        assert s.K_vert == pytest.approx(tau0 ** 2, abs=1e-4)


def test_e_model_values():
    s = curvature_sample(e_model(0.5), np.array([0.1, 0.2, 0.0]))
    assert s.K_hor == pytest.approx(-1.75, abs=1e-4)
    assert s.K_vert == pytest.approx(0.25, abs=1e-4)


def test_curvature_scaled_base():
    # product over curvature -4: horizontal planes have K = -4, vertical planes K = 0
    s = curvature_sample(product_model(PoincareDisk(a=2.0)), np.array([0.3, 0.1, 1.0]))
    assert s.K_hor == pytest.approx(-4.0, abs=1e-4)
    assert s.K_vert == pytest.approx(0.0, abs=1e-4)


def test_vertical_translations_are_isometries():
    model = e_model(1.0)
    assert model.killing_residual(np.array([0.3, -0.2, 0.5])) < 1e-8
    assert flow_isometry_residual(model, np.array([0.3, -0.2, 0.5]), 1.7) < 1e-10


def test_mutation_breaks_frame_agreement():
    bad = mutated(e_model(0.5))
    p = np.array([0.3, 0.2, 0.0])
    fit = compute_tau(bad, p, strict=False)
    assert fit.agreement > 1e-3
    with pytest.raises(FitFailure):
        compute_tau(bad, p)


def test_mutated_model_keeps_metric():
    model = e_model(0.5)
    bad = mutated(model)
    p = np.array([0.3, 0.2, 0.0])
    assert np.allclose(bad.metric(p), model.metric(p))


def test_expression_model_matches_closed_form():
    # omega = c/(1-r^2)(x dy - y dx) with c = -2 is the E(-1, 0.5) connection form
    user = model_from_omega_expressions(PoincareDisk(), "2*y/(1-x**2-y**2)", "-2*x/(1-x**2-y**2)")
    ref = e_model(0.5)
    p = np.array([0.25, -0.1, 0.3])
    assert compute_tau(user, p).tau == pytest.approx(compute_tau(ref, p).tau, abs=1e-6)


def test_frame_report_is_orthonormal():
    model = e_model(0.25)
    rep = frame_report(model, np.array([0.1, 0.1, 0.0]))
    assert isinstance(rep, dict)
    X, Y, xi = model.frame(np.array([0.1, 0.1, 0.0]))
    G = model.metric(np.array([0.1, 0.1, 0.0]))
    F = np.array([X, Y, xi])
    assert np.allclose(F @ G @ F.T, np.eye(3), atol=1e-12)
