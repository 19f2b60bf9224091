"""Vertical flow and geodesics of the total space."""

from __future__ import annotations

import numpy as np
from scipy.integrate import odeint

from ..errors import NoConvergence, StepFailure
from ..tolerances import DEFAULT, Tolerances
from .model import SubmersionModel


def vertical_flow(model: SubmersionModel, p, t: float) -> np.ndarray:
    """Flow of the unit Killing field: translation in the fibre coordinate."""
    q = np.array(p, dtype=float)
    q[2] += t
    return q


def flow_isometry_residual(model: SubmersionModel, p, t: float) -> float:
    """Max component of ``phi_t^* G - G`` at ``p`` (the differential of the flow is the identity)."""
    return float(np.max(np.abs(model.metric(vertical_flow(model, p, t)) - model.metric(p))))


def _rhs(model: SubmersionModel):
    def f(y, s):
        x, v = y[:3], y[3:]
        gam = model.christoffel(x)
        return np.concatenate([v, -np.einsum("kij,i,j->k", gam, v, v)])
    return f


def geodesic3(model: SubmersionModel, p, w, n: int = 65) -> np.ndarray:
    """Geodesic ``c`` with ``c(0) = p``, ``c'(0) = w`` sampled on ``[0, 1]``; rows ``(x, v)``."""
    y0 = np.concatenate([np.asarray(p, float), np.asarray(w, float)])
    s = np.linspace(0.0, 1.0, n)
    try:
        sol, info = odeint(_rhs(model), y0, s, rtol=1e-11, atol=1e-13, full_output=True)
    except Exception as exc:  # chart exit inside the right-hand side
        raise StepFailure(str(exc)) from exc
    if info["message"] != "Integration successful." or not np.all(np.isfinite(sol)):
        raise StepFailure("total-space geodesic integration failed")
    return sol


def distance3(model: SubmersionModel, p, q, tol: Tolerances = DEFAULT, *,
              max_steps: int = 40) -> float:
    """Riemannian distance by shooting: Newton on the initial velocity of ``c: [0, 1] -> M``.

    Valid for points joined by a unique minimizing geodesic (Hadamard-like
    neighbourhoods); the initial guess is the coordinate chord.
    """
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    w = q - p

    def end(w):
        return geodesic3(model, p, w)[-1, :3]

    for _ in range(max_steps):
        r = end(w) - q
        if np.max(np.abs(r)) < 1e-11:
            break
        h = 1e-6 * max(1.0, float(np.linalg.norm(w)))
        Jm = np.column_stack([(end(w + h * e) - end(w - h * e)) / (2 * h) for e in np.eye(3)])
        dw = np.linalg.solve(Jm, -r)
        scale = min(1.0, 0.5 * max(float(np.linalg.norm(w)), 1e-3) / max(float(np.linalg.norm(dw)), 1e-300))
        w = w + scale * dw
    else:
        raise NoConvergence("total-space shooting did not converge")
    return model.norm(p, w)
