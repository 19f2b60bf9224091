"""Geodesics of a conformal base: integration, sampling, shooting.

The geodesic equations of ``lam**2 (dx**2 + dy**2)`` with ``phi = log lam``
read

    x'' = -phi_x (u**2 - v**2) - 2 phi_y u v
    y'' =  phi_y (u**2 - v**2) - 2 phi_x u v

Paths are stored as uniform sample tables of position, velocity and
acceleration; intermediate values use quintic Hermite interpolation, which
is consistent with the stored derivatives to sixth order.
"""

from __future__ import annotations

import math
import warnings
from functools import cached_property

import numpy as np
from scipy.integrate import odeint, trapezoid

from ..errors import ChartExit, NoConvergence, StepFailure
from ..tolerances import DEFAULT, Tolerances
from .models import HadamardModel

RTOL = 1e-12
ATOL = np.array([1e-14, 1e-14, 1e-18, 1e-18])
DEFAULT_DS = 0.01
STALL_ACCEPT = 1e-9  # shooting residual accepted once Newton can no longer decrease it


_STENCIL = 7


def _fd_weights(offsets) -> np.ndarray:
    """First-derivative weights on integer ``offsets`` (exact for polynomials of degree < len)."""
    o = np.asarray(offsets, float)
    m = len(o)
    A = np.vander(o, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return -((-np.asarray(a) + np.pi) % (2 * np.pi) - np.pi)[()]


def geodesic_rhs(model: HadamardModel):
    grad = model.grad_log_lam

    def rhs(state, s):
        x, y, u, v = state
        px, py = grad(x, y)
        q = u * u - v * v
        return [u, v, -px * q - 2.0 * py * u * v, py * q - 2.0 * px * u * v]

    return rhs


def acceleration(model: HadamardModel, pts, vel):
    """Chart acceleration of geodesics through ``pts`` with velocities ``vel``."""
    px, py = model.grad_log_lam(pts[..., 0], pts[..., 1])
    u, v = vel[..., 0], vel[..., 1]
    q = u * u - v * v
    return np.stack([-px * q - 2 * py * u * v, py * q - 2 * px * u * v], axis=-1)


def jacobi_rhs(model: HadamardModel):
    """Geodesic equation together with its linearisation (Jacobi fields)."""
    grad, hess = model.grad_log_lam, model.hess_log_lam

    def rhs(state, s):
        x, y, u, v, X, Y, U, V = state
        px, py = grad(x, y)
        pxx, pxy, pyy = hess(x, y)
        q = u * u - v * v
        uv = u * v
        ax = -px * q - 2.0 * py * uv
        ay = py * q - 2.0 * px * uv
        dax = (-pxx * q - 2 * pxy * uv) * X + (-pxy * q - 2 * pyy * uv) * Y \
            + (-2 * px * u - 2 * py * v) * U + (2 * px * v - 2 * py * u) * V
        day = (pxy * q - 2 * pxx * uv) * X + (pyy * q - 2 * pxy * uv) * Y \
            + (2 * py * u - 2 * px * v) * U + (-2 * py * v - 2 * px * u) * V
        return [u, v, ax, ay, U, V, dax, day]

    return rhs


# Jacobi components only steer Newton iterations; finite-difference Hessians
# of user models are noisy at the 1e-8 level, so they get looser tolerances.
_JACOBI_RTOL = np.r_[np.full(4, RTOL), np.full(4, 1e-8)]
_JACOBI_ATOL = np.r_[ATOL, np.full(4, 1e-10)]


def _integrate(rhs, y0, s_grid, what="geodesic"):
    rtol, atol = (_JACOBI_RTOL, _JACOBI_ATOL) if len(y0) == 8 else (RTOL, ATOL)
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        sol, info = odeint(rhs, y0, s_grid, rtol=rtol, atol=atol, mxstep=20000,
                           full_output=True)
    if info["message"] != "Integration successful." or not np.all(np.isfinite(sol)):
        raise StepFailure(f"{what} integration failed: {info['message']}")
    return sol


# ---------------------------------------------------------------------------
# sampled paths


_H = np.array([
    # coefficients of t^0..t^5 for the six quintic Hermite basis functions
    [1, 0, 0, -10, 15, -6],     # p0
    [0, 1, 0, -6, 8, -3],       # v0 (times h)
    [0, 0, 0.5, -1.5, 1.5, -0.5],  # a0 (times h^2)
    [0, 0, 0, 0.5, -1, 0.5],    # a1 (times h^2)
    [0, 0, 0, -4, 7, -3],       # v1 (times h)
    [0, 0, 0, 10, -15, 6],      # p1
])
_DH = np.array([[k * c[k] for k in range(1, 6)] + [0.0] for c in _H])


class GeodesicPath:
    """Uniformly sampled unit-speed geodesic.

    Attributes
    ----------
    s : ndarray (n,)
        Arc-length parameters, uniformly spaced, increasing.
    points, velocities : ndarray (n, 2)
        Chart position and chart velocity at each sample.
    """

    def __init__(self, model: HadamardModel, s, points, velocities, accelerations=None):
        self.model = model
        self.s = np.asarray(s, dtype=float)
        self.points = np.asarray(points, dtype=float)
        self.velocities = np.asarray(velocities, dtype=float)
        if accelerations is None:
            accelerations = acceleration(model, self.points, self.velocities)
        self.accelerations = np.asarray(accelerations, dtype=float)
        for arr in (self.s, self.points, self.velocities, self.accelerations):
            arr.setflags(write=False)
        self.ds = float(self.s[1] - self.s[0]) if len(self.s) > 1 else 0.0

    # -- basic accessors ----------------------------------------------------
    @property
    def s_min(self) -> float:
        return float(self.s[0])

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    @property
    def length(self) -> float:
        return self.s_max - self.s_min

    def index_of(self, s: float) -> int:
        return int(np.argmin(np.abs(self.s - s)))

    @property
    def start(self) -> np.ndarray:
        return self.at(0.0) if self.s_min <= 0.0 <= self.s_max else self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def _locate(self, s):
        s = np.clip(np.asarray(s, dtype=float), self.s_min, self.s_max)
        i = np.clip(((s - self.s_min) / self.ds).astype(int), 0, len(self.s) - 2)
        t = (s - self.s[i]) / self.ds
        return i, t

    def _hermite(self, s, basis):
        i, t = self._locate(s)
        powers = np.stack([t**k for k in range(6)], axis=-1)
        w = powers @ basis.T  # (..., 6)
        h = self.ds
        P, V, A = self.points, self.velocities, self.accelerations
        terms = (w[..., 0, None] * P[i] + h * w[..., 1, None] * V[i]
                 + h * h * w[..., 2, None] * A[i] + h * h * w[..., 3, None] * A[i + 1]
                 + h * w[..., 4, None] * V[i + 1] + w[..., 5, None] * P[i + 1])
        return terms

    def at(self, s):
        """Chart position at arc length ``s`` (vectorised)."""
        if len(self.s) == 1:
            return np.broadcast_to(self.points[0], np.shape(s) + (2,)).copy()
        return self._hermite(s, _H)

    def velocity_at(self, s):
        if len(self.s) == 1:
            return np.broadcast_to(self.velocities[0], np.shape(s) + (2,)).copy()
        return self._hermite(s, _DH) / self.ds

    def direction_angle(self, s) -> float:
        v = self.velocity_at(s)
        return float(math.atan2(v[1], v[0]))

    # -- diagnostics ---------------------------------------------------------
    def speed_error(self) -> np.ndarray:
        lam = self.model.lam(self.points[:, 0], self.points[:, 1])
        return np.abs(lam * np.hypot(self.velocities[:, 0], self.velocities[:, 1]) - 1.0)

    def equation_residual(self) -> np.ndarray:
        """Metric norm of (finite-difference derivative of velocity) - acceleration.

        Seven-point stencils (central inside, shifted one-sided within three
        samples of either end) give a sixth-order estimate that does not
        reuse the acceleration formula.
        """
        n = len(self.s)
        if n < _STENCIL:
            return np.zeros(n)
        h, V = self.ds, self.velocities
        half = _STENCIL // 2
        dv = np.empty_like(V)
        w = _fd_weights(np.arange(-half, half + 1)) / h
        dv[half:n - half] = sum(w[k] * V[k:n - 2 * half + k] for k in range(_STENCIL))
        for i in range(half):
            wi = _fd_weights(np.arange(_STENCIL) - i) / h
            dv[i] = wi @ V[:_STENCIL]
            dv[n - 1 - i] = -(wi @ V[::-1][:_STENCIL])
        lam = self.model.lam(self.points[:, 0], self.points[:, 1])
        return lam * np.linalg.norm(dv - self.accelerations, axis=1)

    # -- derived objects -------------------------------------------------------
    def reversed(self) -> "GeodesicPath":
        return GeodesicPath(self.model, -self.s[::-1], self.points[::-1], -self.velocities[::-1],
                            self.accelerations[::-1])

    @cached_property
    def ideal_endpoints(self):
        """Backward and forward ideal points of the complete geodesic."""
        from .ideal import ideal_point

        back = ideal_point(self.model, self.points[0], -self.velocities[0])
        fwd = ideal_point(self.model, self.points[-1], self.velocities[-1])
        return back, fwd

    def csv_rows(self):
        for s, p, v in zip(self.s, self.points, self.velocities):
            yield (float(s), float(p[0]), float(p[1]), float(v[0]), float(v[1]))


def _n_samples(length: float, ds: float) -> int:
    return max(8, int(math.ceil(abs(length) / ds))) + 1


def _check_unit(model, p, v, tol):
    err = abs(model.norm(p, v) - 1.0)
    if err > tol.geometric:
        raise ValueError(f"initial vector is not unit (|speed - 1| = {err:.2e})")


def _validate(path: GeodesicPath, tol: Tolerances) -> None:
    speed = float(np.max(path.speed_error()))
    if speed > tol.integration:
        raise StepFailure(f"speed drift {speed:.2e} exceeds {tol.integration:.0e}")
    res = float(np.max(path.equation_residual()))
    if res > tol.integration:
        raise StepFailure(f"geodesic residual {res:.2e} exceeds {tol.integration:.0e}")


def _raw_trace(model, p, v, s_max, ds):
    s = np.linspace(0.0, s_max, _n_samples(s_max, ds))
    sol = _integrate(geodesic_rhs(model), np.r_[p, v], s)
    inside = model.in_chart(sol[:, 0], sol[:, 1])
    if not np.all(inside):
        if not model.complete:
            k = int(np.argmin(inside))
            raise ChartExit(f"geodesic left the chart of {model.name} at s = {s[k]:.4g}")
        raise StepFailure("geodesic reached the numerical edge of the chart")
    return s, sol


def geodesic_trace(model: HadamardModel, p, v, s_max: float, *, ds: float = DEFAULT_DS,
                   tol: Tolerances = DEFAULT, check: bool = True) -> GeodesicPath:
    """Integrate the unit-speed geodesic from ``p`` with initial velocity ``v``.

    Parameters
    ----------
    model : HadamardModel
    p, v : array_like (2,)
        Chart point and unit chart velocity.
    s_max : float
        Arc length to integrate (> 0).
    ds : float
        Sample spacing of the returned table.
    check : bool
        Verify speed drift and equation residual against
        ``tol.integration`` (disabled internally for very long traces
        whose samples approach the chart edge, where evaluating the
        conformal factor itself loses precision).

    Returns
    -------
    GeodesicPath
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    model.require_in_chart(p)
    _check_unit(model, p, v, tol)
    s, sol = _raw_trace(model, p, v, s_max, ds)
    path = GeodesicPath(model, s, sol[:, :2], sol[:, 2:])
    if check:
        _validate(path, tol)
    return path


def geodesic_line(model: HadamardModel, p, v, s_back: float, s_fwd: float, *,
                  ds: float = DEFAULT_DS) -> GeodesicPath:
    """Two-sided geodesic through ``p`` with parameter range ``[-s_back, s_fwd]``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    n_f = _n_samples(s_fwd, ds)
    n_b = _n_samples(s_back, ds)
    h = min(s_fwd / (n_f - 1), s_back / (n_b - 1))
    n_f = int(round(s_fwd / h)) + 1
    n_b = int(round(s_back / h)) + 1
    s_f = np.arange(n_f) * h
    s_b = np.arange(n_b) * h
    fwd = _integrate(geodesic_rhs(model), np.r_[p, v], s_f)
    bwd = _integrate(geodesic_rhs(model), np.r_[p, -v], s_b)
    s = np.r_[-s_b[::-1], s_f[1:]]
    pts = np.r_[bwd[::-1, :2], fwd[1:, :2]]
    vel = np.r_[-bwd[::-1, 2:], fwd[1:, 2:]]
    if not np.all(model.in_chart(pts[:, 0], pts[:, 1])):
        raise StepFailure("geodesic line reached the numerical edge of the chart")
    return GeodesicPath(model, s, pts, vel)


def flow(model: HadamardModel, p, v, s: float):
    """Endpoint and velocity of the geodesic after arc length ``s`` (no table)."""
    sol = _integrate(geodesic_rhs(model), np.r_[p, v], [0.0, s])
    return sol[-1, :2], sol[-1, 2:]


# ---------------------------------------------------------------------------
# shooting


def _chord_length(model, p, q, n: int = 33) -> float:
    t = np.linspace(0.0, 1.0, n)
    pts = p[None, :] + t[:, None] * (q - p)[None, :]
    lam = model.lam(pts[:, 0], pts[:, 1])
    return float(np.linalg.norm(q - p) * trapezoid(lam, t))


def _jacobi_end(model, p, psi, s):
    lam_p = float(model.lam(p[0], p[1]))
    c, sn = math.cos(psi), math.sin(psi)
    y0 = [p[0], p[1], c / lam_p, sn / lam_p, 0.0, 0.0, -sn / lam_p, c / lam_p]
    sol = _integrate(jacobi_rhs(model), y0, [0.0, s], "jacobi")
    return sol[-1]


def _side_value(model, p, psi, q, length):
    """Signed chart cross product of the geodesic line through p (angle psi) with q."""
    v = model.unit_vector(p, psi)
    line = geodesic_line(model, p, v, length, length, ds=length / 64)
    d = np.linalg.norm(line.points - q, axis=1)
    k = int(np.argmin(d))
    s0 = line.s[k]
    # refine the closest approach on the interpolant
    ss = np.linspace(max(s0 - line.ds, line.s_min), min(s0 + line.ds, line.s_max), 41)
    pts = line.at(ss)
    j = int(np.argmin(np.linalg.norm(pts - q, axis=1)))
    w = q - pts[j]
    t = line.velocity_at(ss[j])
    return t[0] * w[1] - t[1] * w[0]


class Shot:
    """Solution of the two-point problem: direction, length, end velocity."""

    __slots__ = ("psi", "length", "end_velocity", "iterations")

    def __init__(self, psi, length, end_velocity, iterations):
        self.psi = psi
        self.length = length
        self.end_velocity = end_velocity
        self.iterations = iterations


def shoot(model: HadamardModel, p, q, tol: Tolerances = DEFAULT, *,
          target: float = 1e-11) -> Shot:
    """Solve ``exp_p(s * e(psi)) = q`` for the angle ``psi`` and length ``s``.

    Damped Newton on ``(s, psi)`` with the Jacobi-field Jacobian, started
    from the chord direction; if it stalls, a sign-change bracket on
    ``psi`` (uniqueness of connecting geodesics makes the side function
    change sign exactly once on a half-turn) is bisected and Newton resumes
    from there.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.allclose(p, q, rtol=0, atol=1e-15):
        raise ValueError("shoot needs two distinct points")
    model.require_in_chart(p)
    model.require_in_chart(q)
    lam_q = float(model.lam(q[0], q[1]))
    psi = math.atan2(q[1] - p[1], q[0] - p[0])
    s = _chord_length(model, p, q)
    budget = tol.max_iter
    used = 0

    def newton(psi, s, max_steps):
        nonlocal used
        end = _jacobi_end(model, p, psi, s)
        err = lam_q * math.hypot(q[0] - end[0], q[1] - end[1])
        for _ in range(max_steps):
            used += 1
            if err < target:
                return psi, s, end, err, True
            r = q - end[:2]
            jac = np.array([[end[2], end[4]], [end[3], end[5]]])
            try:
                ds_, dpsi = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                return psi, s, end, err, False
            dpsi = max(-0.5, min(0.5, dpsi))
            ds_ = max(-0.5 * s, ds_)
            step = 1.0
            for _ in range(12):
                psi_n, s_n = psi + step * dpsi, s + step * ds_
                try:
                    end_n = _jacobi_end(model, p, psi_n, s_n)
                    err_n = lam_q * math.hypot(q[0] - end_n[0], q[1] - end_n[1])
                except StepFailure:
                    err_n = math.inf
                if err_n < err:
                    break
                step *= 0.5
            else:
                # no descent left: the residual sits at the integration noise floor
                return psi, s, end, err, err < STALL_ACCEPT
            psi, s, end, err = psi_n, s_n, end_n, err_n
        return psi, s, end, err, err < STALL_ACCEPT

    psi_r, s_r, end, err, ok = newton(psi, s, 40)
    if not ok:
        # bracketing fallback on the initial angle
        length = 1.5 * _chord_length(model, p, q) + 1.0
        lo, hi = psi - 0.5 * math.pi, psi + 0.5 * math.pi
        f_lo = _side_value(model, p, lo, q, length)
        f_hi = _side_value(model, p, hi, q, length)
        if f_lo * f_hi > 0:
            raise NoConvergence("connect: could not bracket the initial angle")
        while hi - lo > 1e-3 and used < budget:
            used += 1
            mid = 0.5 * (lo + hi)
            f_mid = _side_value(model, p, mid, q, length)
            if f_mid * f_lo > 0:
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        psi0 = 0.5 * (lo + hi)
        v0 = model.unit_vector(p, psi0)
        line = geodesic_line(model, p, v0, 0.0 + 1e-3, length, ds=length / 400)
        s0 = float(line.s[np.argmin(np.linalg.norm(line.points - q, axis=1))])
        psi_r, s_r, end, err, ok = newton(psi0, max(s0, 1e-6), max(1, budget - used))
    if not ok:
        raise NoConvergence(f"connect: residual {err:.2e} after {used} iterations")
    return Shot(wrap_angle(psi_r), s_r, end[2:4].copy(), used)


def connect(model: HadamardModel, p, q, *, tol: Tolerances = DEFAULT,
            ds: float = DEFAULT_DS):
    """Geodesic segment from ``p`` to ``q`` and its length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    model.require_in_chart(p)
    model.require_in_chart(q)
    shot = shoot(model, p, q, tol)
    n = _n_samples(shot.length, ds)
    path = geodesic_trace(model, p, model.unit_vector(p, shot.psi), shot.length,
                          ds=shot.length / (n - 1), tol=tol)
    return path, shot.length


def distance(model: HadamardModel, p, q, tol: Tolerances = DEFAULT) -> float:
    return shoot(model, p, q, tol).length


def angle_at(model: HadamardModel, p, q, r, tol: Tolerances = DEFAULT) -> float:
    """Angle at ``p`` between the geodesics towards ``q`` and ``r``, in [0, pi]."""
    a = shoot(model, p, q, tol).psi
    b = shoot(model, p, r, tol).psi
    return float(abs(wrap_angle(a - b)))
