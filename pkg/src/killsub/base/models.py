"""Conformal charts for strict Hadamard surfaces.

A base surface is represented by a conformal factor ``lam`` on a chart
domain (the open unit disk or the whole plane); the metric is
``lam**2 * (dx**2 + dy**2)``.  Everything downstream only needs
``log lam`` and its first two derivatives, so a model is essentially a
provider of those three functions.

The built-in model is the Poincare disk with curvature ``-a**2``.  User
models are given by an expression for the conformal factor; their
derivatives come from Richardson-extrapolated central differences.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import NotStrict, OutOfChart

FD_STEP = 1e-5
FD_STEP2 = 1e-4


def _richardson(d_h, d_h2):
    return (4.0 * d_h2 - d_h) / 3.0


def _is_scalar(x, y) -> bool:
    return isinstance(x, float) and isinstance(y, float)


def _build_stencil():
    """Offsets and weights reproducing the Richardson-extrapolated stencils.

    Rows of the weight matrix give phi_x, phi_y, phi_xx, phi_xy, phi_yy as
    linear combinations of log-lam values at the offsets.
    """
    offsets = {}
    rows = [dict() for _ in range(5)]

    def add(row, dx, dy, w):
        key = (dx, dy)
        offsets.setdefault(key, len(offsets))
        rows[row][key] = rows[row].get(key, 0.0) + w

    for h, c in ((FD_STEP, -1 / 3), (FD_STEP / 2, 4 / 3)):
        add(0, h, 0.0, c / (2 * h)); add(0, -h, 0.0, -c / (2 * h))
        add(1, 0.0, h, c / (2 * h)); add(1, 0.0, -h, -c / (2 * h))
    for h, c in ((FD_STEP2, -1 / 3), (FD_STEP2 / 2, 4 / 3)):
        add(2, h, 0.0, c / h**2); add(2, -h, 0.0, c / h**2); add(2, 0.0, 0.0, -2 * c / h**2)
        add(4, 0.0, h, c / h**2); add(4, 0.0, -h, c / h**2); add(4, 0.0, 0.0, -2 * c / h**2)
        q = c / (4 * h * h)
        add(3, h, h, q); add(3, h, -h, -q); add(3, -h, h, -q); add(3, -h, -h, q)
    pts = np.array(sorted(offsets, key=offsets.get))
    weights = np.zeros((5, len(pts)))
    for r, row in enumerate(rows):
        for key, w in row.items():
            weights[r, offsets[key]] = w
    return pts, weights


_STENCIL, _STENCIL_WEIGHTS = _build_stencil()


class HadamardModel:
    """Abstract conformal model of a complete surface.

    Subclasses implement :meth:`log_lam`; the default derivative methods
    use finite differences and are overridden where closed forms exist.
    """

    name: str = "model"
    domain: str = "disk"
    complete: bool = True
    strict: bool = True
    #: geodesics through the chart origin are the coordinate rays
    radial_basepoint: bool = False
    basepoint = (0.0, 0.0)

    # -- metric -----------------------------------------------------------
    def log_lam(self, x, y):
        raise NotImplementedError

    def lam(self, x, y):
        return np.exp(self.log_lam(x, y))

    def grad_log_lam(self, x, y):
        """Gradient of ``log lam`` (phi_x, phi_y)."""
        if _is_scalar(x, y):
            return self._scalar_derivatives(x, y)[:2]
        f = self.log_lam

        def d(h):
            return ((f(x + h, y) - f(x - h, y)) / (2 * h),
                    (f(x, y + h) - f(x, y - h)) / (2 * h))

        a, b = d(FD_STEP), d(FD_STEP / 2)
        return _richardson(a[0], b[0]), _richardson(a[1], b[1])

    def hess_log_lam(self, x, y):
        """Second derivatives (phi_xx, phi_xy, phi_yy)."""
        if _is_scalar(x, y):
            return self._scalar_derivatives(x, y)[2:]
        f = self.log_lam

        def d(h):
            f0 = f(x, y)
            fxx = (f(x + h, y) - 2 * f0 + f(x - h, y)) / h**2
            fyy = (f(x, y + h) - 2 * f0 + f(x, y - h)) / h**2
            fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
            return fxx, fxy, fyy

        a, b = d(FD_STEP2), d(FD_STEP2 / 2)
        return tuple(_richardson(p, q) for p, q in zip(a, b))

    def _scalar_derivatives(self, x, y):
        """Same stencils as the array path, evaluated in one vectorised call."""
        vals = self.log_lam(x + _STENCIL[:, 0], y + _STENCIL[:, 1])
        g = _STENCIL_WEIGHTS @ vals
        return tuple(float(v) for v in g)

    def gauss_curvature(self, x, y):
        """kappa = -Laplacian(log lam) / lam**2."""
        fxx, _, fyy = self.hess_log_lam(x, y)
        return -(fxx + fyy) / self.lam(x, y) ** 2

    # -- chart ------------------------------------------------------------
    def in_chart(self, x, y, margin: float = 0.0):
        if self.domain == "plane":
            return np.isfinite(x) & np.isfinite(y)
        return np.asarray(x) ** 2 + np.asarray(y) ** 2 < 1.0 - margin

    def require_in_chart(self, p) -> None:
        if not np.all(self.in_chart(p[0], p[1])):
            raise OutOfChart(f"point {tuple(np.round(p, 12))} is outside the chart of {self.name}")

    def chart_margin(self, x, y):
        """Distance-like margin to the chart edge (``1 - r**2`` on the disk)."""
        if self.domain == "plane":
            return np.full_like(np.asarray(x, dtype=float), np.inf)
        return 1.0 - (np.asarray(x) ** 2 + np.asarray(y) ** 2)

    # -- tangent vectors --------------------------------------------------
    def norm(self, p, v):
        return float(self.lam(p[0], p[1]) * math.hypot(v[0], v[1]))

    def unit_vector(self, p, angle: float) -> np.ndarray:
        """Unit tangent vector at ``p`` making chart angle ``angle`` with +x."""
        lam = float(self.lam(p[0], p[1]))
        return np.array([math.cos(angle), math.sin(angle)]) / lam

    def rotate(self, p, v, angle: float) -> np.ndarray:
        """Rotate ``v`` counter-clockwise by ``angle`` (conformal: chart rotation)."""
        c, s = math.cos(angle), math.sin(angle)
        return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])

    # -- distance from the basepoint ---------------------------------------
    def distance_from_basepoint(self, x, y):
        """Metric distance from the chart origin.

        Valid for models whose coordinate rays through the origin are
        geodesics (rotationally symmetric factors); the radial integral is
        evaluated with Gauss-Legendre quadrature.
        """
        if not self.radial_basepoint:
            raise NotImplementedError("distance from basepoint needs a radial model")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        nodes, weights = np.polynomial.legendre.leggauss(48)
        t = 0.5 * (nodes + 1.0)
        w = 0.5 * weights
        tx = np.multiply.outer(x, t)
        ty = np.multiply.outer(y, t)
        return r * np.sum(self.lam(tx, ty) * w, axis=-1)

    # -- strictness --------------------------------------------------------
    def curvature_grid(self, n_r: int = 40, n_theta: int = 48, r_max: float = 0.98):
        if self.domain == "plane":
            xs = np.linspace(-4.0, 4.0, n_r)
            X, Y = np.meshgrid(xs, xs)
        else:
            r = np.linspace(0.0, r_max, n_r)
            th = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
            R, T = np.meshgrid(r, th)
            X, Y = R * np.cos(T), R * np.sin(T)
        return X, Y, self.gauss_curvature(X, Y)

    def curvature_bound(self) -> float:
        """Largest sampled Gauss curvature (the bound ``c`` of ``kappa <= c``)."""
        return float(np.max(self.curvature_grid()[2]))

    def check_strict(self, threshold: float = -1e-8) -> float:
        c = self.curvature_bound()
        if not c < threshold:
            raise NotStrict(f"{self.name}: sampled curvature reaches {c:.3e}, not bounded away from 0")
        return c


@dataclass(frozen=True, eq=False)
class PoincareDisk(HadamardModel):
    """Poincare disk rescaled to constant curvature ``-a**2``."""

    a: float = 1.0
    name: str = "poincare"

    domain = "disk"
    complete = True
    radial_basepoint = True

    def log_lam(self, x, y):
        return math.log(2.0 / self.a) - np.log1p(-(x * x + y * y))

    def lam(self, x, y):
        return 2.0 / (self.a * (1.0 - (x * x + y * y)))

    def grad_log_lam(self, x, y):
        q = 2.0 / (1.0 - (x * x + y * y))
        return q * x, q * y

    def hess_log_lam(self, x, y):
        m = 1.0 - (x * x + y * y)
        base = 2.0 / m
        k = 4.0 / (m * m)
        return base + k * x * x, k * x * y, base + k * y * y

    def gauss_curvature(self, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, -self.a**2)[()]

    def curvature_bound(self) -> float:
        return -self.a**2

    def distance_from_basepoint(self, x, y):
        r = np.hypot(x, y)
        return 2.0 * np.arctanh(r) / self.a

    def exp_points(self, center, angles, dists):
        """Closed-form exponential map at ``center`` (vectorised).

        Uses the disk automorphism ``w -> (w + c) / (1 + conj(c) w)``, whose
        derivative at 0 is a positive real, so chart directions at the
        centre are preserved.
        """
        c = complex(center[0], center[1])
        w = np.tanh(0.5 * self.a * np.asarray(dists)) * np.exp(1j * np.asarray(angles))
        z = (w + c) / (1.0 + np.conj(c) * w)
        return np.stack([z.real, z.imag], axis=-1)


class ConformalModel(HadamardModel):
    """User model given by a callable ``log lam``.

    Derivatives are computed by finite differences.  ``complete`` is a
    declaration (it cannot be certified numerically) and ``strict`` is
    verified on construction unless ``verify=False``.
    """

    def __init__(self, name: str, log_lam: Callable, *, domain: str = "disk",
                 complete: bool = True, radial: bool = False, verify: bool = True,
                 log_lam_complex: Callable | None = None):
        if domain not in ("disk", "plane"):
            raise ValueError(f"unknown chart domain {domain!r}")
        self.name = name
        self._log_lam = log_lam
        self._log_lam_complex = log_lam_complex
        self.domain = domain
        self.complete = complete
        self.radial_basepoint = radial
        self._bound = None
        if verify:
            self._bound = self.check_strict()
            self.strict = True
        else:
            self.strict = False

    def log_lam(self, x, y):
        if isinstance(x, float) and isinstance(y, float):
            return self._log_lam(x, y)
        return np.asarray(self._log_lam(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))[()]

    def grad_log_lam(self, x, y):
        # Complex-step derivatives are free of cancellation noise; the ODE
        # integrators otherwise see 1e-11 jitter and fall into stiff mode.
        if self._log_lam_complex is not None and _is_scalar(x, y):
            h = 1e-30
            return (self._log_lam_complex(x + 1j * h, y).imag / h,
                    self._log_lam_complex(x, y + 1j * h).imag / h)
        return super().grad_log_lam(x, y)

    def curvature_bound(self) -> float:
        if self._bound is None:
            self._bound = super().curvature_bound()
        return self._bound

    def __repr__(self) -> str:
        return f"ConformalModel({self.name!r}, domain={self.domain!r})"


class FlatPlane(HadamardModel):
    """Euclidean plane (``lam = 1``).  Test-only: not a strict Hadamard model."""

    name = "flat"
    domain = "plane"
    strict = False
    radial_basepoint = True

    def log_lam(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)[()]

    def lam(self, x, y):
        return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)[()]

    def grad_log_lam(self, x, y):
        z = self.log_lam(x, y)
        return z, z

    def hess_log_lam(self, x, y):
        z = self.log_lam(x, y)
        return z, z, z

    def curvature_bound(self) -> float:
        return 0.0

    def distance_from_basepoint(self, x, y):
        return np.hypot(x, y)


# ---------------------------------------------------------------------------
# expression-defined models

_NUMPY_NAMES = ("exp", "log", "log1p", "sqrt", "sin", "cos", "tan", "sinh", "cosh",
                "tanh", "arctanh", "arcsinh", "arctan", "abs", "pi")
_EXPR_NAMESPACE = {name: getattr(np, name) for name in _NUMPY_NAMES}
_SCALAR_NAMESPACE = {
    name: getattr(math, {"arctanh": "atanh", "arcsinh": "asinh", "arctan": "atan",
                         "abs": "fabs"}.get(name, name))
    for name in _NUMPY_NAMES
}

_COMPLEX_NAMESPACE = {
    "exp": cmath.exp, "log": cmath.log, "log1p": lambda z: cmath.log(1 + z),
    "sqrt": cmath.sqrt, "sin": cmath.sin, "cos": cmath.cos, "tan": cmath.tan,
    "sinh": cmath.sinh, "cosh": cmath.cosh, "tanh": cmath.tanh, "arctanh": cmath.atanh,
    "arcsinh": cmath.asinh, "arctan": cmath.atan, "abs": abs, "pi": math.pi,
}


def compile_expression(expr: str, variables=("x", "y")) -> Callable:
    """Compile an arithmetic expression in ``x, y`` to a vectorised callable.

    Only elementwise math functions are visible; builtins are disabled.
    Scalar float arguments are evaluated with :mod:`math` (the ODE
    right-hand sides call the model one point at a time).
    """
    code = compile(expr, "<expression>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name not in variables:
            raise ValueError(f"unknown name {name!r} in expression {expr!r}")
    vec_ns = {"__builtins__": {}, **_EXPR_NAMESPACE}
    scalar_ns = {"__builtins__": {}, **_SCALAR_NAMESPACE}

    complex_ns = {"__builtins__": {}, **_COMPLEX_NAMESPACE}

    def complex_fn(*args):
        try:
            return complex(eval(code, complex_ns, dict(zip(variables, args))))  # noqa: S307
        except (ValueError, ZeroDivisionError, OverflowError):
            return complex(math.nan, math.nan)

    def fn(*args):
        if all(isinstance(a, float) for a in args):
            try:
                return float(eval(code, scalar_ns, dict(zip(variables, args))))  # noqa: S307
            except (ValueError, ZeroDivisionError, OverflowError):
                return math.nan
        args = [np.asarray(a, dtype=float) for a in args]
        with np.errstate(all="ignore"):
            out = eval(code, vec_ns, dict(zip(variables, args)))  # noqa: S307
        return np.broadcast_to(out, np.broadcast(*args).shape).astype(float)

    fn.expression = expr
    fn.complex = complex_fn
    return fn


def model_from_expression(name: str, lam_expr: str, *, domain: str = "disk",
                          complete: bool = True, radial: bool = False) -> ConformalModel:
    lam = compile_expression(lam_expr)

    def log_lam_complex(x, y):
        return cmath.log(lam.complex(x, y))

    def log_lam(x, y):
        value = lam(x, y)
        if isinstance(value, float):
            return math.log(value) if value > 0 else math.nan
        return np.log(value)

    model = ConformalModel(name, log_lam, domain=domain, complete=complete, radial=radial,
                           log_lam_complex=log_lam_complex)
    model.expression = lam_expr
    return model
