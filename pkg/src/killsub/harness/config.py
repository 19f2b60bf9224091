"""Strict YAML configuration: model, surface and scenario catalogues with includes.

Every mapping is validated against a schema before anything is computed;
unknown keys, missing required keys and type mismatches raise
:class:`ConfigError` naming the file and the dotted key path.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from ..errors import ConfigError
from ..tolerances import Tolerances

COMMANDS = ("verify", "curvature", "geodesic", "foliate", "cylinder", "sweep")
DEFAULT_SEED = 0
_REQUIRED = object()


@dataclass(frozen=True)
class Field:
    kind: str                      # int | float | str | bool | list | map | any
    default: Any = _REQUIRED
    choices: tuple | None = None
    item: str | None = None        # element kind for lists
    nullable: bool = False

    @property
    def required(self) -> bool:
        return self.default is _REQUIRED


def _type_ok(kind: str, value) -> bool:
    if kind == "any":
        return True
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "list":
        return isinstance(value, list)
    if kind == "map":
        return isinstance(value, dict)
    raise ValueError(f"unknown schema kind {kind!r}")


def validate(data, schema: dict, where: str) -> dict:
    """Check ``data`` against ``schema`` and return a copy with defaults filled in."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown key (allowed: {', '.join(sorted(schema))})")
    out = {}
    for key, spec in schema.items():
        loc = f"{where}.{key}"
        if key not in data:
            if spec.required:
                raise ConfigError(f"{loc}: required key is missing")
            out[key] = copy.deepcopy(spec.default)
            continue
        value = data[key]
        if value is None and spec.nullable:
            out[key] = None
            continue
        if not _type_ok(spec.kind, value):
            raise ConfigError(f"{loc}: expected {spec.kind}, got {type(value).__name__} ({value!r})")
        if spec.kind == "float":
            value = float(value)
        if spec.choices is not None and value not in spec.choices:
            raise ConfigError(f"{loc}: {value!r} is not one of {', '.join(map(str, spec.choices))}")
        if spec.kind == "list" and spec.item is not None:
            for i, v in enumerate(value):
                if not _type_ok(spec.item, v):
                    raise ConfigError(f"{loc}[{i}]: expected {spec.item}, got {type(v).__name__} ({v!r})")
            if spec.item == "float":
                value = [float(v) for v in value]
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# schemas

TOLERANCE_SCHEMA = {f.name: Field("int" if f.type in ("int", int) else "float", None, nullable=True)
                    for f in fields(Tolerances)}

TOP_SCHEMA = {
    "include": Field("list", [], item="str"),
    "seed": Field("int", DEFAULT_SEED),
    "workers": Field("int", 1),
    "tolerances": Field("map", {}),
    "models": Field("map", {}),
    "surfaces": Field("map", {}),
    "scenarios": Field("list", []),
}

MODEL_SCHEMAS = {
    "product": {"kind": Field("str"), "a": Field("float", 1.0), "mutated": Field("bool", False)},
    "e": {"kind": Field("str"), "tau0": Field("float"), "a": Field("float", 1.0),
          "mutated": Field("bool", False)},
    "expression": {"kind": Field("str"), "lambda": Field("str"), "omega": Field("list", ["0", "0"], item="str"),
                   "tau": Field("str", None, nullable=True), "domain": Field("str", "disk", ("disk", "plane")),
                   "radial": Field("bool", False), "mutated": Field("bool", False)},
}

SURFACE_SCHEMAS = {
    "sphere": {"kind": Field("str"), "center": Field("list", item="float"), "radius": Field("float"),
               "grid_step": Field("float", 0.05)},
    "convex_graph": {"kind": Field("str"), "coeff": Field("float", 0.2), "radius": Field("float", 0.9),
                     "grid_step": Field("float", 0.02)},
    "saddle": {"kind": Field("str"), "coeff": Field("float", 0.5), "radius": Field("float", 0.8),
               "grid_step": Field("float", 0.02)},
    "slice": {"kind": Field("str"), "radius": Field("float", 0.8), "grid_step": Field("float", 0.02)},
    "flaring": {"kind": Field("str"), "theta0": Field("float", 0.7), "sigma0": Field("float", 0.0),
                "c": Field("float", 1.0), "u_half": Field("float", 11.0), "v_half": Field("float", 2.8),
                "grid_step": Field("float", 0.05)},
}

SCENARIO_SCHEMA = {
    "name": Field("str"),
    "command": Field("str", choices=COMMANDS),
    "model": Field("str"),
    "surface": Field("str", None, nullable=True),
    "inputs": Field("map", {}),
    "tolerances": Field("map", {}),
    "tags": Field("list", [], item="str"),
    "seed": Field("int", None, nullable=True),
    "expect_fail": Field("list", [], item="str"),
    "outputs": Field("map", {}),
}

OUTPUT_SCHEMA = {"json": Field("str", None, nullable=True), "csv_prefix": Field("str", None, nullable=True)}

_FOLIATION = {"anchor": Field("list", None, item="float", nullable=True), "angle": Field("float", 0.0),
              "t0": Field("float", None, nullable=True), "t1": Field("float", None, nullable=True),
              "step": Field("float", 0.1)}

INPUT_SCHEMAS = {
    "verify": {
        "n_points": Field("int", 200), "r_max": Field("float", 0.9), "t_range": Field("float", 5.0),
        "expected_tau": Field("float", None, nullable=True),
        "fit_tolerance": Field("float", 1e-6), "frame_tolerance": Field("float", 1e-6),
        "tau_tolerance": Field("float", 1e-6), "curvature_tolerance": Field("float", 1e-4),
        "killing_tolerance": Field("float", 1e-6), "random_frames": Field("bool", True),
        "checks": Field("list", None, item="str", nullable=True),
    },
    "curvature": {
        "n_points": Field("int", 200), "r_max": Field("float", 0.9), "t_range": Field("float", 5.0),
        "expected_horizontal": Field("float", None, nullable=True),
        "expected_vertical": Field("float", None, nullable=True),
        "tolerance": Field("float", 1e-4),
    },
    "geodesic": {
        "n_triangles": Field("int", 1000), "r_max": Field("float", 0.9),
        "slack_tolerance": Field("float", 1e-6), "n_distance_pairs": Field("int", 200),
        "distance_tolerance": Field("float", 1e-6),
    },
    "foliate": {
        "kind": Field("str", "orthogonal", ("orthogonal", "ideal")),
        "n_leaves": Field("int", 12), "anchor": Field("list", [0.0, 0.0], item="float"),
        "angle": Field("float", 0.0), "s_range": Field("float", 3.0),
        "ideal_point": Field("float", 3.141592653589793), "arc_half_width": Field("float", 2.5),
        "window": Field("float", 4.0), "n_feet": Field("int", 6),
        "scan_points": Field("int", 101), "orthogonality_tolerance": Field("float", 1e-4),
    },
    "cylinder": {
        "n_curves": Field("int", 20), "curve_length": Field("float", 1.5),
        "curvature_scale": Field("float", 1.0), "plane": Field("bool", False),
        "tolerance": Field("float", 1e-5), "plane_tolerance": Field("float", 1e-6),
        "hypothesis": Field("bool", False), "hypothesis_samples": Field("int", 25),
    },
    "sweep": {
        "foliation": Field("map", {}), "directions": Field("list", None, item="float", nullable=True),
        "refine": Field("bool", True),
        "expected": Field("str", None, nullable=True,
                          choices=("Sphere", "PlaneKillingGraph", "PlaneSimpleEnd", "Inconclusive")),
        "expected_end_angle": Field("float", None, nullable=True),
        "angle_tolerance": Field("float", 0.05), "random_sections": Field("int", 0),
        "diameter_cap": Field("float", 50.0),
    },
}


# ---------------------------------------------------------------------------
# loading


@dataclass
class Config:
    seed: int = DEFAULT_SEED
    workers: int = 1
    tolerances: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    surfaces: dict = field(default_factory=dict)
    scenarios: list = field(default_factory=list)
    source: str = "<memory>"

    def tolerance_set(self, overrides: dict | None = None, scale: float = 1.0) -> Tolerances:
        values = {k: v for k, v in self.tolerances.items() if v is not None}
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        tol = Tolerances(**values)
        return tol.scaled(scale) if scale != 1.0 else tol

    def scenario(self, name: str) -> dict:
        for sc in self.scenarios:
            if sc["name"] == name:
                return sc
        raise ConfigError(f"scenarios: no scenario named {name!r}")

    def canonical(self) -> dict:
        return {"seed": self.seed, "workers": self.workers, "tolerances": self.tolerances,
                "models": self.models, "surfaces": self.surfaces, "scenarios": self.scenarios}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _read_yaml(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None


def _merge_catalog(dst: dict, src: dict, what: str, where: str) -> None:
    for key, value in src.items():
        if key in dst:
            raise ConfigError(f"{where}.{what}.{key}: defined twice")
        dst[key] = value


def _load_raw(path: Path, stack: tuple) -> dict:
    path = path.resolve()
    if path in stack:
        raise ConfigError(f"{path}: circular include")
    raw = _read_yaml(path)
    where = str(path)
    top = validate(raw, TOP_SCHEMA, where)
    merged = {"models": {}, "surfaces": {}, "scenarios": [], "tolerances": {}}
    for i, inc in enumerate(top["include"]):
        inc_path = Path(inc) if os.path.isabs(inc) else path.parent / inc
        sub = _load_raw(inc_path, stack + (path,))
        _merge_catalog(merged["models"], sub["models"], "models", f"{where}.include[{i}]")
        _merge_catalog(merged["surfaces"], sub["surfaces"], "surfaces", f"{where}.include[{i}]")
        merged["scenarios"].extend(sub["scenarios"])
        merged["tolerances"].update(sub["tolerances"])
    _merge_catalog(merged["models"], top["models"], "models", where)
    _merge_catalog(merged["surfaces"], top["surfaces"], "surfaces", where)
    for i, sc in enumerate(top["scenarios"]):
        merged["scenarios"].append((f"{where}: scenarios[{i}]", sc))
    merged["tolerances"].update(top["tolerances"])
    merged["seed"], merged["workers"] = top["seed"], top["workers"]
    return merged


def _validate_model(name: str, spec, where: str) -> dict:
    loc = f"{where}.models.{name}"
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{loc}.kind: required key is missing")
    kind = spec["kind"]
    if kind not in MODEL_SCHEMAS:
        raise ConfigError(f"{loc}.kind: {kind!r} is not one of {', '.join(MODEL_SCHEMAS)}")
    out = validate(spec, MODEL_SCHEMAS[kind], loc)
    if kind == "expression" and len(out["omega"]) != 2:
        raise ConfigError(f"{loc}.omega: expected two expressions (dx and dy coefficients)")
    return out


def _validate_surface(name: str, spec, where: str) -> dict:
    loc = f"{where}.surfaces.{name}"
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{loc}.kind: required key is missing")
    kind = spec["kind"]
    if kind not in SURFACE_SCHEMAS:
        raise ConfigError(f"{loc}.kind: {kind!r} is not one of {', '.join(SURFACE_SCHEMAS)}")
    out = validate(spec, SURFACE_SCHEMAS[kind], loc)
    if kind == "sphere" and len(out["center"]) != 3:
        raise ConfigError(f"{loc}.center: expected three coordinates (x, y, t)")
    return out


def _validate_scenario(loc: str, raw, cfg: Config) -> dict:
    sc = validate(raw, SCENARIO_SCHEMA, loc)
    loc = f"{loc} ({sc['name']})"
    sc["inputs"] = validate(sc["inputs"], INPUT_SCHEMAS[sc["command"]], f"{loc}.inputs")
    sc["tolerances"] = validate(sc["tolerances"], TOLERANCE_SCHEMA, f"{loc}.tolerances")
    sc["tolerances"] = {k: v for k, v in sc["tolerances"].items() if v is not None}
    sc["outputs"] = validate(sc["outputs"], OUTPUT_SCHEMA, f"{loc}.outputs")
    if sc["command"] == "sweep":
        sc["inputs"]["foliation"] = validate(sc["inputs"]["foliation"], _FOLIATION,
                                             f"{loc}.inputs.foliation")
        anchor = sc["inputs"]["foliation"]["anchor"]
        if anchor is not None and len(anchor) != 2:
            raise ConfigError(f"{loc}.inputs.foliation.anchor: expected two coordinates")
        if sc["surface"] is None:
            raise ConfigError(f"{loc}.surface: required for sweep scenarios")
    if sc["model"] not in cfg.models:
        raise ConfigError(f"{loc}.model: unknown model {sc['model']!r}")
    if sc["surface"] is not None and sc["surface"] not in cfg.surfaces:
        raise ConfigError(f"{loc}.surface: unknown surface {sc['surface']!r}")
    return sc


def load_config(path) -> Config:
    """Parse and validate a configuration file (and everything it includes)."""
    path = Path(path)
    merged = _load_raw(path, ())
    where = str(path.resolve())
    cfg = Config(seed=merged["seed"], workers=merged["workers"], source=where)
    cfg.tolerances = validate(merged["tolerances"], TOLERANCE_SCHEMA, f"{where}.tolerances")
    cfg.tolerances = {k: v for k, v in cfg.tolerances.items() if v is not None}
    cfg.models = {k: _validate_model(k, v, where) for k, v in merged["models"].items()}
    cfg.surfaces = {k: _validate_surface(k, v, where) for k, v in merged["surfaces"].items()}
    seen = set()
    for loc, raw in merged["scenarios"]:
        sc = _validate_scenario(loc, raw, cfg)
        if sc["name"] in seen:
            raise ConfigError(f"{loc}.name: duplicate scenario name {sc['name']!r}")
        seen.add(sc["name"])
        cfg.scenarios.append(sc)
    try:
        cfg.tolerance_set()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.tolerances: {exc}") from None
    return cfg


def builtin_config_path() -> Path:
    return Path(__file__).with_name("builtin") / "suite.yaml"
