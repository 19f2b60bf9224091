"""Total space of a Killing submersion over a conformal Hadamard chart.

The total space is realised on the global chart ``(x, y, t)`` with metric

    G = lambda^2 (dx^2 + dy^2) + (dt + a dx + b dy)^2,

so ``d/dt`` is the unit Killing field ``xi`` and the projection to ``(x, y)``
is a Riemannian submersion.  The connection form ``omega = a dx + b dy`` is
plumbing: bundle curvature is never read off ``omega`` but extracted from the
ambient connection (see :mod:`killsub.submersion.connection`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..base.models import (FD_STEP, FlatPlane, HadamardModel, PoincareDisk, _richardson,
                           compile_expression)
from ..errors import OutOfChart

Omega = Callable[[float, float], tuple]


def _zero_omega(x, y):
    return 0.0, 0.0


def _zero_omega_jac(x, y):
    return 0.0, 0.0, 0.0, 0.0


@dataclass(frozen=True, eq=False)
class SubmersionModel:
    """Killing submersion ``pi: M -> base`` on a single chart.

    ``omega(x, y) -> (a, b)``; ``omega_jac(x, y) -> (a_x, a_y, b_x, b_y)``
    enables analytic Christoffel symbols, otherwise central differences are
    used.  ``cross_sign`` is a fault-injection hook: the derivative table of
    the ``dt (x) omega`` half of the cross term is assembled with
    ``cross_sign * omega`` (the ``omega (x) dt`` half keeps ``omega``).  Any
    value other than 1 yields a connection that is not the Levi-Civita
    connection of a Killing submersion.
    """

    base: HadamardModel
    name: str = "product"
    omega: Omega = _zero_omega
    omega_jac: Optional[Callable] = _zero_omega_jac
    analytic_tau: Optional[Callable] = None
    cross_sign: float = 1.0
    meta: dict = field(default_factory=dict)

    # ------------------------------------------------------------------ basics
    @property
    def analytic(self) -> bool:
        return self.omega_jac is not None

    def require_in_chart(self, p) -> None:
        self.base.require_in_chart(np.asarray(p, dtype=float)[:2])

    def metric(self, p) -> np.ndarray:
        x, y = float(p[0]), float(p[1])
        lam2 = float(self.base.lam(x, y)) ** 2
        a, b = (float(v) for v in self.omega(x, y))
        return np.array([[lam2 + a * a, a * b, a],
                         [a * b, lam2 + b * b, b],
                         [a, b, 1.0]])

    def volume_density(self, p) -> float:
        """sqrt(det G) = lambda^2."""
        return float(self.base.lam(float(p[0]), float(p[1]))) ** 2

    def inner(self, p, u, v) -> float:
        return float(np.asarray(u) @ self.metric(p) @ np.asarray(v))

    def norm(self, p, u) -> float:
        return float(np.sqrt(max(self.inner(p, u, u), 0.0)))

    # ---------------------------------------------------------- derivatives
    def omega_derivatives(self, x, y):
        """``(a_x, a_y, b_x, b_y)``: analytic when available, else Richardson central differences."""
        if self.omega_jac is not None:
            return tuple(float(v) for v in self.omega_jac(x, y))

        def central(h):
            ax = (np.array(self.omega(x + h, y)) - np.array(self.omega(x - h, y))) / (2 * h)
            ay = (np.array(self.omega(x, y + h)) - np.array(self.omega(x, y - h))) / (2 * h)
            return np.array([ax[0], ay[0], ax[1], ay[1]])

        return tuple(_richardson(central(FD_STEP), central(FD_STEP / 2)))

    def metric_derivatives(self, p) -> np.ndarray:
        """``dG[l, i, j] = d_l G_ij`` (``l`` over x, y, t; the t-row vanishes)."""
        x, y = float(p[0]), float(p[1])
        dG = np.zeros((3, 3, 3))
        lam2 = float(self.base.lam(x, y)) ** 2
        phx, phy = (float(v) for v in self.base.grad_log_lam(x, y))
        a, b = (float(v) for v in self.omega(x, y))
        ax, ay, bx, by = self.omega_derivatives(x, y)
        for l, (dl2, da, db) in enumerate(((2 * lam2 * phx, ax, bx), (2 * lam2 * phy, ay, by))):
            dG[l] = [[dl2 + 2 * a * da, da * b + a * db, da],
                     [da * b + a * db, dl2 + 2 * b * db, db],
                     [self.cross_sign * da, self.cross_sign * db, 0.0]]
        return dG

    def christoffel(self, p) -> np.ndarray:
        """``Gamma[k, i, j]`` of the total metric at ``p``; exactly symmetric in ``i, j``."""
        self.require_in_chart(p)
        G = self.metric(p)
        dG = self.metric_derivatives(p)
        # lower[l, i, j] = 1/2 (d_i G_jl + d_j G_il - d_l G_ij)
        lower = 0.5 * (np.einsum("ijl->lij", dG) + np.einsum("jil->lij", dG) - dG)
        gam = np.einsum("kl,lij->kij", np.linalg.inv(G), lower)
        return 0.5 * (gam + gam.transpose(0, 2, 1))

    # ------------------------------------------------------- batch evaluation
    def omega_batch(self, x, y):
        a, b = self.omega(x, y)
        shape = np.broadcast(x, y).shape
        return np.broadcast_to(np.asarray(a, float), shape), np.broadcast_to(np.asarray(b, float), shape)

    def omega_derivatives_batch(self, x, y):
        shape = np.broadcast(x, y).shape
        if self.omega_jac is not None:
            return tuple(np.broadcast_to(np.asarray(v, float), shape) for v in self.omega_jac(x, y))

        def central(h):
            a1, b1 = self.omega_batch(x + h, y)
            a0, b0 = self.omega_batch(x - h, y)
            a3, b3 = self.omega_batch(x, y + h)
            a2, b2 = self.omega_batch(x, y - h)
            return np.stack([(a1 - a0), (a3 - a2), (b1 - b0), (b3 - b2)]) / (2 * h)

        return tuple(_richardson(central(FD_STEP), central(FD_STEP / 2)))

    def metric_batch(self, pts) -> np.ndarray:
        """Metric at an array of points ``(..., 3)`` -> ``(..., 3, 3)``."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        lam2 = np.asarray(self.base.lam(x, y), float) ** 2
        a, b = self.omega_batch(x, y)
        G = np.empty(pts.shape[:-1] + (3, 3))
        G[..., 0, 0] = lam2 + a * a
        G[..., 0, 1] = G[..., 1, 0] = a * b
        G[..., 1, 1] = lam2 + b * b
        G[..., 0, 2] = G[..., 2, 0] = a
        G[..., 1, 2] = G[..., 2, 1] = b
        G[..., 2, 2] = 1.0
        return G

    def christoffel_batch(self, pts) -> np.ndarray:
        """``Gamma[..., k, i, j]`` at an array of points."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        lam2 = np.asarray(self.base.lam(x, y), float) ** 2
        phx, phy = (np.asarray(v, float) for v in self.base.grad_log_lam(x, y))
        a, b = self.omega_batch(x, y)
        ax, ay, bx, by = self.omega_derivatives_batch(x, y)
        cs = self.cross_sign
        dG = np.zeros(pts.shape[:-1] + (3, 3, 3))
        for l, (dl2, da, db) in enumerate(((2 * lam2 * phx, ax, bx), (2 * lam2 * phy, ay, by))):
            dG[..., l, 0, 0] = dl2 + 2 * a * da
            dG[..., l, 0, 1] = dG[..., l, 1, 0] = da * b + a * db
            dG[..., l, 1, 1] = dl2 + 2 * b * db
            dG[..., l, 0, 2], dG[..., l, 1, 2] = da, db
            dG[..., l, 2, 0], dG[..., l, 2, 1] = cs * da, cs * db
        lower = 0.5 * (np.einsum("...ijl->...lij", dG) + np.einsum("...jil->...lij", dG) - dG)
        gam = np.einsum("...kl,...lij->...kij", np.linalg.inv(self.metric_batch(pts)), lower)
        return 0.5 * (gam + np.swapaxes(gam, -1, -2))

    def wedge_batch(self, pts, u, v) -> np.ndarray:
        """Riemannian cross product at an array of points."""
        pts = np.asarray(pts, dtype=float)
        lam2 = np.asarray(self.base.lam(pts[..., 0], pts[..., 1]), float) ** 2
        rhs = lam2[..., None] * np.cross(u, v)
        return np.linalg.solve(self.metric_batch(pts), rhs[..., None])[..., 0]

    def killing_residual(self, p, h: float = 1e-5) -> float:
        """Max component of the Lie derivative of G along d/dt (central difference in t)."""
        p = np.asarray(p, dtype=float)
        e = np.array([0.0, 0.0, h])
        return float(np.max(np.abs(self.metric(p + e) - self.metric(p - e))) / (2 * h))

    # --------------------------------------------------------------- frames
    def xi(self, p=None) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    def horizontal_lift(self, p, v) -> np.ndarray:
        """Horizontal lift of the base vector ``v`` at ``pi(p)`` (declared omega)."""
        a, b = self.omega(float(p[0]), float(p[1]))
        return np.array([v[0], v[1], -(a * v[0] + b * v[1])])

    def frame(self, p, angle: float = 0.0) -> np.ndarray:
        """Rows ``X, Y, xi``: horizontal lifts of the base orthonormal frame rotated by ``angle``."""
        lam = float(self.base.lam(float(p[0]), float(p[1])))
        c, s = np.cos(angle), np.sin(angle)
        X = self.horizontal_lift(p, np.array([c, s]) / lam)
        Y = self.horizontal_lift(p, np.array([-s, c]) / lam)
        return np.array([X, Y, self.xi(p)])

    def lift_field(self, coeffs) -> Callable:
        """Horizontal vector field with constant coefficients in the lifted coordinate frame."""
        c = np.asarray(coeffs, dtype=float)

        def field_at(q):
            lam = float(self.base.lam(float(q[0]), float(q[1])))
            return self.horizontal_lift(q, c / lam)

        return field_at

    def vertical_part(self, p, v) -> np.ndarray:
        return self.inner(p, v, self.xi(p)) * self.xi(p)

    def horizontal_part(self, p, v) -> np.ndarray:
        return np.asarray(v, dtype=float) - self.vertical_part(p, v)

    def projection(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float)[:2].copy()


# ---------------------------------------------------------------------------
# built-in catalogue


def product_model(base: HadamardModel | None = None) -> SubmersionModel:
    """``base x R`` (omega = 0)."""
    base = base if base is not None else PoincareDisk()
    return SubmersionModel(base=base, name=f"{base.name}xR", analytic_tau=lambda x, y: 0.0)


def flat_model() -> SubmersionModel:
    """Euclidean R^3 (test-only: the base is not Hadamard-strict)."""
    return SubmersionModel(base=FlatPlane(), name="flat", analytic_tau=lambda x, y: 0.0)


# Rotationally symmetric connection form omega = c/(1 - r^2) (x dy - y dx) on the
# Poincare disk of curvature -a^2.  Its sign relative to tau was fixed by
# running compute_tau on the assembled metric, not by transcription.
E_MODEL_SIGN = -1.0


def e_model(tau0: float, a: float = 1.0) -> SubmersionModel:
    """Homogeneous ``E(-a^2, tau0)`` over the Poincare disk of curvature ``-a^2``."""
    base = PoincareDisk(a=a)
    c = E_MODEL_SIGN * 4.0 * tau0 / (a * a)

    def omega(x, y):
        m = 1.0 - x * x - y * y
        return -c * y / m, c * x / m

    def omega_jac(x, y):
        m = 1.0 - x * x - y * y
        m2 = m * m
        return (-c * 2 * x * y / m2, -c * (m + 2 * y * y) / m2,
                c * (m + 2 * x * x) / m2, c * 2 * x * y / m2)

    return SubmersionModel(base=base, name=f"E({-a * a:g},{tau0:g})", omega=omega,
                           omega_jac=omega_jac, analytic_tau=lambda x, y: tau0,
                           meta={"tau0": tau0, "a": a})


def model_from_omega_expressions(base: HadamardModel, a_expr: str, b_expr: str, *,
                                 name: str = "user", tau_expr: str | None = None) -> SubmersionModel:
    """Submersion with ``omega = a dx + b dy`` given as expressions in ``x, y``.

    Christoffel symbols then use Richardson-extrapolated central differences.
    """
    fa = compile_expression(a_expr)
    fb = compile_expression(b_expr)
    tau = compile_expression(tau_expr) if tau_expr else None

    def omega(x, y):
        return fa(x, y), fb(x, y)

    return SubmersionModel(base=base, name=name, omega=omega, omega_jac=None,
                           analytic_tau=tau, meta={"omega": [a_expr, b_expr]})


def mutated(model: SubmersionModel) -> SubmersionModel:
    """Fault injection: ``omega`` enters the ``dt (x) omega`` half of the connection data with
    flipped sign.

    Flipping ``omega`` consistently everywhere is not a fault: it produces
    another Killing submersion (with ``tau`` negated) and every check passes.
    """
    return SubmersionModel(base=model.base, name=model.name + "[mutated]", omega=model.omega,
                           omega_jac=model.omega_jac, analytic_tau=model.analytic_tau,
                           cross_sign=-model.cross_sign,
                           meta=dict(model.meta, mutated=True))


def random_points(model: SubmersionModel, n: int, rng: np.random.Generator, *,
                  r_max: float = 0.9, t_range: float = 5.0) -> np.ndarray:
    """Uniform-in-chart sample points ``(x, y, t)`` with chart radius below ``r_max``."""
    r = r_max * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    t = rng.uniform(-t_range, t_range, n)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th), t])
    if not np.all(model.base.in_chart(pts[:, 0], pts[:, 1])):
        raise OutOfChart("sample radius exceeds the chart")
    return pts
