"""Ambient connection, cross product, bundle curvature and sectional curvatures."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from ..base.models import _richardson
from ..errors import DegenerateSpan, FitFailure
from ..tolerances import DEFAULT, Tolerances
from .model import SubmersionModel

CURVATURE_STEP = 1e-5
FIELD_STEP = 1e-5


def _unit(i: int) -> np.ndarray:
    e = np.zeros(3)
    e[i] = 1.0
    return e


def covariant_derivative(model: SubmersionModel, field: Callable, p, X) -> np.ndarray:
    """``nabla_X field`` at ``p``: directional derivative plus Christoffel term."""
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    gam = model.christoffel(p)

    def directional(h):
        return (np.asarray(field(p + h * X)) - np.asarray(field(p - h * X))) / (2 * h)

    nx = float(np.linalg.norm(X))
    if nx == 0.0:
        return np.zeros(3)
    h = FIELD_STEP / nx
    dV = _richardson(directional(h), directional(h / 2))
    return dV + np.einsum("kij,i,j->k", gam, X, np.asarray(field(p)))


def nabla_xi(model: SubmersionModel, p, X) -> np.ndarray:
    """``nabla_X xi``; xi = d/dt has constant components so only Gamma contributes."""
    return np.einsum("kij,i->k", model.christoffel(p)[:, :, 2:3], np.asarray(X))[:]


def wedge(model: SubmersionModel, p, u, v) -> np.ndarray:
    """Riemannian cross product: ``<u ^ v, w> = vol(u, v, w)``."""
    G = model.metric(p)
    return np.linalg.solve(G, model.volume_density(p) * np.cross(u, v))


def J_op(model: SubmersionModel, p, X) -> np.ndarray:
    return wedge(model, p, X, model.xi(p))


def det3(model: SubmersionModel, p, u, v, w) -> float:
    """Volume form of the oriented total metric."""
    return model.volume_density(p) * float(np.linalg.det(np.array([u, v, w])))


# ---------------------------------------------------------------------------
# bundle curvature


@dataclass(frozen=True)
class TauFit:
    tau: float
    fit_residual: float
    tau_x: float
    tau_y: float

    @property
    def agreement(self) -> float:
        return abs(self.tau_x - self.tau_y)


def _single_fit(model, p, X):
    d = nabla_xi(model, p, X)
    jx = J_op(model, p, X)
    n2 = model.inner(p, jx, jx)
    return d, jx, model.inner(p, d, jx) / n2, n2


def compute_tau(model: SubmersionModel, p, tol: Tolerances = DEFAULT, *,
                angle: float = 0.0, strict: bool = True) -> TauFit:
    """Least-squares ``tau`` in ``nabla_X xi = tau X ^ xi`` over a horizontal frame.

    The frame is the horizontal lift of the base frame rotated by ``angle``.
    With ``strict`` the fit raises :class:`FitFailure` when the residual or
    the disagreement between the two single-direction fits exceeds
    ``tol.geometric``.
    """
    p = np.asarray(p, dtype=float)
    X, Y, _ = model.frame(p, angle)
    dX, jX, tX, nX = _single_fit(model, p, X)
    dY, jY, tY, nY = _single_fit(model, p, Y)
    tau = (model.inner(p, dX, jX) + model.inner(p, dY, jY)) / (nX + nY)
    res = max(model.norm(p, dX - tau * jX), model.norm(p, dY - tau * jY))
    fit = TauFit(tau=float(tau), fit_residual=float(res), tau_x=float(tX), tau_y=float(tY))
    if strict:
        if fit.agreement > tol.geometric:
            raise FitFailure(f"frame disagreement |tau_X - tau_Y| = {fit.agreement:.3e} at {p}")
        if res > tol.geometric:
            raise FitFailure(f"tau fit residual {res:.3e} at {p}")
    return fit


# ---------------------------------------------------------------------------
# curvature


def christoffel_derivatives(model: SubmersionModel, p, h: float = CURVATURE_STEP) -> np.ndarray:
    """``dGam[l, k, i, j] = d_l Gamma^k_ij`` (t-derivative vanishes)."""
    p = np.asarray(p, dtype=float)
    out = np.zeros((3, 3, 3, 3))

    def central(l, hh):
        e = hh * _unit(l)
        return (model.christoffel(p + e) - model.christoffel(p - e)) / (2 * hh)

    for l in range(2):
        out[l] = _richardson(central(l, h), central(l, h / 2))
    return out


def riemann(model: SubmersionModel, p) -> np.ndarray:
    """``R[l, i, j, k]`` with ``R(d_i, d_j) d_k = R^l_ijk d_l``, ``R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``."""
    gam = model.christoffel(p)
    dgam = christoffel_derivatives(model, p)
    # d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
    R = (np.einsum("iljk->lijk", dgam) - np.einsum("jlik->lijk", dgam)
         + np.einsum("lim,mjk->lijk", gam, gam) - np.einsum("ljm,mik->lijk", gam, gam))
    return R


def sectional_curvature(model: SubmersionModel, p, span, *, R: np.ndarray | None = None) -> float:
    """Sectional curvature ``<R(X,Y)Y, X> / |X ^ Y|^2`` of the plane spanned by ``span``."""
    p = np.asarray(p, dtype=float)
    X, Y = (np.asarray(v, dtype=float) for v in span)
    G = model.metric(p)
    gxx, gyy, gxy = X @ G @ X, Y @ G @ Y, X @ G @ Y
    denom = gxx * gyy - gxy * gxy
    if denom <= 1e-12 * max(gxx * gyy, 1e-300):
        raise DegenerateSpan("span is (numerically) linearly dependent")
    R = riemann(model, p) if R is None else R
    RXYY = np.einsum("lijk,i,j,k->l", R, X, Y, Y)
    return float(X @ G @ RXYY / denom)


@dataclass(frozen=True)
class CurvatureSample:
    x: float
    y: float
    t: float
    tau: float
    kappa: float
    K_hor: float
    K_vert: float
    res1: float
    res2: float

    CSV_FIELDS = ("x", "y", "t", "tau", "kappa", "K_hor", "K_vert", "res1", "res2")

    def row(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


def curvature_sample(model: SubmersionModel, p, tol: Tolerances = DEFAULT, *,
                     angle: float = 0.0, strict: bool = True) -> CurvatureSample:
    """Horizontal and vertical sectional curvatures with residuals of
    ``K(X,Y) = kappa - 3 tau^2`` and ``K(X, xi) = tau^2``."""
    p = np.asarray(p, dtype=float)
    fit = compute_tau(model, p, tol, angle=angle, strict=strict)
    kappa = float(model.base.gauss_curvature(p[0], p[1]))
    X, Y, xi = model.frame(p, angle)
    R = riemann(model, p)
    k_hor = sectional_curvature(model, p, (X, Y), R=R)
    k_vert = sectional_curvature(model, p, (X, xi), R=R)
    tau = fit.tau
    return CurvatureSample(x=float(p[0]), y=float(p[1]), t=float(p[2]), tau=tau, kappa=kappa,
                           K_hor=k_hor, K_vert=k_vert,
                           res1=abs(k_hor - (kappa - 3 * tau * tau)),
                           res2=abs(k_vert - tau * tau))


def write_curvature_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CurvatureSample.CSV_FIELDS)
        for s in samples:
            w.writerow([f"{v:.12g}" for v in s.row()])


# ---------------------------------------------------------------------------
# O'Neill tensors


def _extend(model: SubmersionModel, p, V) -> Callable:
    """Extend a tangent vector at ``p``: horizontal part by a lifted constant-coefficient
    field, vertical part by a constant multiple of xi."""
    p = np.asarray(p, dtype=float)
    V = np.asarray(V, dtype=float)
    lam = float(model.base.lam(p[0], p[1]))
    hpart = model.horizontal_part(p, V)
    coeffs = lam * hpart[:2]
    vcoef = model.inner(p, V, model.xi(p))
    hor = model.lift_field(coeffs)

    def field(q):
        return hor(q) + vcoef * model.xi(q)

    return field


def _split_fields(model, p, V):
    f = _extend(model, p, V)

    def fh(q):
        return model.horizontal_part(q, f(q))

    def fv(q):
        return model.vertical_part(q, f(q))

    return fh, fv


def tensor_A(model: SubmersionModel, p, X, Y) -> np.ndarray:
    """``A_X Y = (nabla_{X^h} Y^h)^v + (nabla_{X^h} Y^v)^h``."""
    Xh = model.horizontal_part(p, X)
    Yh, Yv = _split_fields(model, p, Y)
    return (model.vertical_part(p, covariant_derivative(model, Yh, p, Xh))
            + model.horizontal_part(p, covariant_derivative(model, Yv, p, Xh)))


def tensor_T(model: SubmersionModel, p, X, Y) -> np.ndarray:
    """``T_X Y = (nabla_{X^v} Y^v)^h + (nabla_{X^v} Y^h)^v``."""
    Xv = model.vertical_part(p, X)
    Yh, Yv = _split_fields(model, p, Y)
    return (model.horizontal_part(p, covariant_derivative(model, Yv, p, Xv))
            + model.vertical_part(p, covariant_derivative(model, Yh, p, Xv)))


def frame_report(model: SubmersionModel, p, angle: float = 0.0) -> dict:
    """Orthonormality and orientation of the lifted frame (submersion check)."""
    F = model.frame(p, angle)
    G = model.metric(p)
    gram = F @ G @ F.T
    return {"orthonormality": float(np.max(np.abs(gram - np.eye(3)))),
            "det": det3(model, p, *F),
            "base_isometry": float(abs(math.hypot(*F[0, :2]) * model.base.lam(p[0], p[1]) - 1.0))}


def as_dict(obj) -> dict:
    return asdict(obj)
