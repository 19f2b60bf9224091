"""Build models and surfaces from validated catalogue entries."""

from __future__ import annotations

from ..base.models import PoincareDisk, model_from_expression
from ..errors import ConfigError
from ..submersion.model import (SubmersionModel, e_model, model_from_omega_expressions,
                                mutated, product_model)
from ..surfaces.fixtures import (FlaringSpec, entire_convex_graph, flaring_surface,
                                 geodesic_sphere, horizontal_slice, saddle_graph)


def build_model(name: str, spec: dict) -> SubmersionModel:
    kind = spec["kind"]
    if kind == "product":
        model = product_model(PoincareDisk(a=spec["a"]))
    elif kind == "e":
        model = e_model(spec["tau0"], a=spec["a"])
    elif kind == "expression":
        try:
            base = model_from_expression(name, spec["lambda"], domain=spec["domain"],
                                         radial=spec["radial"])
            a_expr, b_expr = spec["omega"]
            model = model_from_omega_expressions(base, a_expr, b_expr, name=name,
                                                 tau_expr=spec["tau"])
        except ValueError as exc:
            raise ConfigError(f"models.{name}: {exc}") from None
    else:  # pragma: no cover - rejected by the schema
        raise ConfigError(f"models.{name}.kind: unknown kind {kind!r}")
    return mutated(model) if spec["mutated"] else model


def build_surface(name: str, spec: dict, model: SubmersionModel):
    kind = spec["kind"]
    try:
        if kind == "sphere":
            return geodesic_sphere(model, spec["center"], spec["radius"], grid_step=spec["grid_step"])
        if kind == "convex_graph":
            return entire_convex_graph(model, coeff=spec["coeff"], radius=spec["radius"],
                                       grid_step=spec["grid_step"])
        if kind == "saddle":
            return saddle_graph(model, coeff=spec["coeff"], radius=spec["radius"],
                                grid_step=spec["grid_step"])
        if kind == "slice":
            return horizontal_slice(model, radius=spec["radius"], grid_step=spec["grid_step"])
        if kind == "flaring":
            fs = FlaringSpec(theta0=spec["theta0"], sigma0=spec["sigma0"], c=spec["c"],
                             u_half=spec["u_half"], v_half=spec["v_half"])
            return flaring_surface(model, fs, grid_step=spec["grid_step"])
    except ValueError as exc:
        raise ConfigError(f"surfaces.{name}: {exc}") from None
    raise ConfigError(f"surfaces.{name}.kind: unknown kind {kind!r}")  # pragma: no cover


def default_foliation(surface, spec: dict) -> dict:
    """Sweep window for a surface: spheres are swept across their full extent."""
    if spec["kind"] == "sphere":
        c, r = spec["center"], spec["radius"]
        return {"anchor": [c[0], c[1]], "t0": -r - 0.3, "t1": r + 0.3}
    return {"anchor": [0.0, 0.0], "t0": -3.0, "t1": 3.0}
