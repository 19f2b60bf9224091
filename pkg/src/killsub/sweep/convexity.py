"""Convexity and tilt of plane sections, computed in flat plane coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import WindowTooSmall

MIN_CURVATURE = 1e-3
CHORD_SPAN = 3


def resample(plane: np.ndarray, closed: bool, h: float | None = None):
    """Uniform arc-length resampling; returns ``(points, sigma, sigma_of_vertices)``."""
    pts = np.vstack([plane, plane[:1]]) if closed else plane
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    sig = np.r_[0.0, np.cumsum(seg)]
    L = sig[-1]
    if h is None:
        h = float(np.median(seg[seg > 0])) if np.any(seg > 0) else 1.0
    n = max(int(np.ceil(L / max(h, 1e-12))), 8)
    grid = np.linspace(0.0, L, n + 1)
    if closed:
        grid = grid[:-1]
    q = np.stack([np.interp(grid, sig, pts[:, k]) for k in range(2)], -1)
    return q, grid, sig[:len(plane)]


def _signed_turn(u, v):
    return np.arctan2(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0], np.einsum("ij,ij->i", u, v))


def plane_curvature(plane: np.ndarray, closed: bool, *, span: int = CHORD_SPAN) -> np.ndarray:
    """Signed curvature at each vertex of a polyline in flat coordinates.

    The vertices lie on the curve, so each vertex is compared with the
    nearest vertices at least ``span`` median segment lengths away on either
    side: curvature = turning angle between the two chords over their mean
    length.  End vertices of open curves reuse the nearest interior value.
    """
    plane = np.asarray(plane, float)
    n = len(plane)
    if n < 3:
        return np.zeros(n)
    pts = np.vstack([plane, plane[:1]]) if closed else plane
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    sig = np.r_[0.0, np.cumsum(seg)]
    L = sig[-1]
    pos = seg[seg > 0]
    delta = span * (float(np.median(pos)) if len(pos) else 1.0)
    if closed:
        delta = min(delta, L / 6)
        ext = np.r_[sig[:-1] - L, sig[:-1], sig[:-1] + L]
        base = np.arange(n)
        idx3 = np.r_[base, base, base]
        s0 = sig[:-1]
        jb = np.searchsorted(ext, s0 - delta, side="right") - 1
        jf = np.searchsorted(ext, s0 + delta, side="left")
        back = plane - plane[idx3[jb]]
        fwd = plane[idx3[jf]] - plane
        lb, lf = s0 - ext[jb], ext[jf] - s0
        return _signed_turn(back, fwd) / (0.5 * (lb + lf))
    delta = min(delta, L / 4)
    jb = np.searchsorted(sig, sig - delta, side="right") - 1
    jf = np.searchsorted(sig, sig + delta, side="left")
    inner = (sig - delta >= 0) & (sig + delta <= L)
    if not np.any(inner):
        return np.zeros(n)
    i = np.flatnonzero(inner)
    back = plane[i] - plane[jb[i]]
    fwd = plane[jf[i]] - plane[i]
    k = _signed_turn(back, fwd) / (0.5 * ((sig[i] - sig[jb[i]]) + (sig[jf[i]] - sig[i])))
    out = np.interp(sig, sig[i], k)
    return out


@dataclass(frozen=True)
class ConvexityReport:
    passed: bool
    margin: float          # min |curvature|
    sign: int              # +1 / -1 / 0 (mixed)
    sign_changes: int
    worst_index: int
    closed: bool

    def as_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "sign": self.sign,
                "sign_changes": self.sign_changes, "worst_index": self.worst_index,
                "closed": self.closed}


def convexity_check(model, curve, plane=None, *, min_curvature: float = MIN_CURVATURE) -> ConvexityReport:
    """Strict convexity of a section: curvature bounded away from zero with constant sign."""
    k = np.asarray(curve.kg)
    if len(k) == 0:
        return ConvexityReport(False, 0.0, 0, 0, -1, bool(curve.closed))
    sgn = np.sign(k)
    changes = int(np.count_nonzero(sgn[1:] != sgn[:-1]))
    if curve.closed:
        changes += int(sgn[0] != sgn[-1])
    i = int(np.argmin(np.abs(k)))
    margin = float(abs(k[i]))
    sign = int(sgn[0]) if changes == 0 else 0
    passed = bool(changes == 0 and margin > min_curvature)
    return ConvexityReport(passed, margin, sign, changes, i, bool(curve.closed))


# ---------------------------------------------------------------------------
# tilt


class Tilt(str, Enum):
    TILTED = "Tilted"
    UNTILTED = "Untilted"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class TiltReport:
    classification: Tilt
    direction: int | None = None      # +1: ray towards t' > 0, -1: towards t' < 0
    witness: tuple | None = None      # plane coordinates of the extremum point
    n_extrema: int = 0
    reason: str = ""

    def as_dict(self) -> dict:
        return {"classification": self.classification.value, "direction": self.direction,
                "witness": None if self.witness is None else list(self.witness),
                "n_extrema": self.n_extrema, "reason": self.reason}


def _ray_hits(q: np.ndarray, k: int, direction: int, exclude: int) -> bool:
    """Does the vertical ray from ``q[k]`` in ``direction`` meet the polyline away from ``k``?"""
    s0, t0 = q[k]
    a, b = q[:-1], q[1:]
    lo, hi = np.minimum(a[:, 0], b[:, 0]), np.maximum(a[:, 0], b[:, 0])
    straddle = (lo <= s0) & (s0 <= hi) & (hi > lo)
    seg = np.arange(len(a))
    straddle &= np.abs(seg - k) > exclude
    if not np.any(straddle):
        return False
    a, b = a[straddle], b[straddle]
    lam = (s0 - a[:, 0]) / (b[:, 0] - a[:, 0])
    t_hit = a[:, 1] + lam * (b[:, 1] - a[:, 1])
    return bool(np.any(direction * (t_hit - t0) > 0))


def _classify_open(plane: np.ndarray) -> TiltReport:
    q, _, _ = resample(plane, False)
    if len(q) < 5:
        return TiltReport(Tilt.NOT_APPLICABLE, reason="too few samples")
    dt = np.diff(q[:, 1])
    sgn = np.sign(dt)
    nz = np.flatnonzero(sgn != 0)
    ext = []
    for a, b in zip(nz[:-1], nz[1:]):
        if sgn[a] != sgn[b]:
            k = b if b == a + 1 else (a + b + 1) // 2
            ext.append((k, 1 if sgn[a] < 0 else -1))  # minimum -> body above
    exclude = CHORD_SPAN + 1
    for k, direction in ext:
        if not _ray_hits(q, k, direction, exclude):
            return TiltReport(Tilt.UNTILTED, direction, (float(q[k, 0]), float(q[k, 1])), len(ext))
    return TiltReport(Tilt.TILTED, None, None, len(ext))


def _central_half(plane: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(plane, axis=0), axis=1)
    sig = np.r_[0.0, np.cumsum(seg)]
    L = sig[-1]
    keep = (sig >= 0.25 * L) & (sig <= 0.75 * L)
    return plane[keep]


def tilt_classify(curve, plane=None, *, convex: bool | None = None) -> TiltReport:
    """Tilted / untilted classification of a window-cut convex section.

    A section is untilted when, from some extremum of ``t'`` along the
    curve, the vertical ray into the convex side never meets the curve
    again.  The classification is repeated on the central half (by arc
    length) of the curve; a change means the window is too small to
    decide and raises :class:`WindowTooSmall`.
    """
    if curve.closed or not curve.window:
        return TiltReport(Tilt.NOT_APPLICABLE, reason="curve is compact")
    if convex is None:
        convex = convexity_check(None, curve).passed
    if not convex:
        return TiltReport(Tilt.NOT_APPLICABLE, reason="curve is not strictly convex")
    full = _classify_open(np.asarray(curve.plane, float))
    half = _classify_open(_central_half(np.asarray(curve.plane, float)))
    if half.classification is not Tilt.NOT_APPLICABLE and half.classification is not full.classification:
        raise WindowTooSmall(f"tilt changes from {full.classification.value} to "
                             f"{half.classification.value} on the central half of the section")
    return full
