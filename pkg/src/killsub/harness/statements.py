"""The mathematical statement behind each named check (used in suite summaries)."""

from __future__ import annotations

STATEMENTS = {
    "tau_fit_residual": "bundle curvature: nabla_X xi = tau X ^ xi for horizontal X",
    "frame_agreement": "bundle curvature: tau is the same for both vectors of a horizontal frame",
    "tau_value": "bundle curvature equals the model's declared tau",
    "killing_field": "xi is a Killing field (metric invariant under vertical translation)",
    "horizontal_curvature_identity": "sectional curvature of horizontal planes: K(X,Y) = kappa - 3 tau^2",
    "vertical_curvature_identity": "sectional curvature of vertical planes: K(X,xi) = tau^2",
    "horizontal_curvature_value": "horizontal sectional curvature takes the expected constant value",
    "vertical_curvature_value": "vertical sectional curvature takes the expected constant value",
    "law_of_cosines_slack": "Hadamard comparison: c^2 >= a^2 + b^2 - 2ab cos(gamma)",
    "double_law_slack": "Hadamard comparison: b cos(alpha) + a cos(beta) >= c",
    "angle_sum_slack": "Hadamard comparison: angle sum of a geodesic triangle is at most pi",
    "closed_form_distance": "shooting distance matches the closed-form hyperbolic distance",
    "leaves_disjoint": "the geodesics of the foliation are pairwise disjoint",
    "feet_orthogonal": "the nearest point on a geodesic is reached orthogonally",
    "feet_unique": "the nearest point on a geodesic is unique (single minimum of the distance)",
    "second_fundamental_form": "vertical cylinder: II = [[0, -tau], [-tau, k_g]] in the basis (xi, T)",
    "mean_curvature_half_kg": "vertical cylinder: H = k_g / 2",
    "intrinsic_curvature_zero": "vertical cylinder: intrinsic curvature K = 0",
    "extrinsic_curvature_minus_tau2": "vertical cylinder: extrinsic curvature K_e = -tau^2",
    "totally_geodesic_plane": "vertical planes over geodesics in a product are totally geodesic",
    "hypothesis_rejects_cylinder": "vertical cylinders violate min(k1, k2) > |tau| (zero extrinsic curvature)",
    "classification": "sweep classification of a complete convex surface (sphere, graph, simple end)",
    "graph_projection_convex": "a Killing graph with nowhere-horizontal normal projects injectively onto a convex domain",
    "end_angle": "the simple end converges to the expected ideal point",
    "refinement_stable": "the sweep classification does not change when the plane grid is refined",
    "sections_strictly_convex": "transversal vertical-plane sections are strictly convex curves",
}


def statement_for(check: str) -> str:
    """Statement for a check name; bracketed qualifiers (``name[...]``) are ignored."""
    return STATEMENTS.get(check.split("[", 1)[0], "")
