"""Exception hierarchy shared by all modules.

Every numerical failure is raised as a typed error carrying the quantity
that missed its tolerance, so callers (and the regression harness) can
report *which* check broke rather than a bare traceback.
"""

from __future__ import annotations


class GeometryError(Exception):
    """Base class for all library errors."""


class NotStrict(GeometryError):
    """Base metric fails the strict negative curvature bound."""


class ChartExit(GeometryError):
    """A trajectory left the coordinate chart of a non-complete model."""


class StepFailure(GeometryError):
    """The ODE integrator could not meet its tolerance."""


class NoConvergence(GeometryError):
    """An iterative solver exhausted its budget."""


class NoStabilization(GeometryError):
    """A limiting direction did not stabilise before the cutoff."""


class NotAHadamardBase(GeometryError):
    """Ideal-boundary or comparison operation requested on an invalid base."""


class DegenerateEndpoints(GeometryError):
    """Two ideal points coincide within the angular tolerance."""


class NotUnitSpeed(GeometryError):
    """A base curve is not parametrised by arc length."""


class NotIntersecting(GeometryError):
    """A geodesic does not meet a foliation where it was required to."""


class FoliationCheckFailed(GeometryError):
    """A finite witness of the foliation property failed."""


class DegenerateFrame(GeometryError):
    """A frame field is not orthonormal, horizontal or non-degenerate."""


class FiberBundleMismatch(GeometryError):
    """Fibres are not unit length or the connection is inconsistent."""


class FitFailure(GeometryError):
    """The bundle-curvature fit residual exceeds its tolerance."""


class DegenerateSpan(GeometryError):
    """Two tangent vectors do not span a plane."""


class RankDeficient(GeometryError):
    """The differential of a surface parametrisation degenerates."""


class InconsistentTau(GeometryError):
    """The bundle curvature is not constant or the fit residual is too large."""


class NonIsometricFlow(GeometryError):
    """The vertical translation fails to preserve distances."""


class OutOfChart(GeometryError):
    """A point lies outside the chart of the model."""


class SingularChart(GeometryError):
    """A surface chart has degenerate first fundamental form."""


class TangencySuspected(GeometryError):
    """A slicing plane is (nearly) tangent to the surface."""


class WindowTooSmall(GeometryError):
    """The computational window does not resolve the asymptotic behaviour."""


class InsufficientExtent(GeometryError):
    """The surface samples do not reach far enough to decide an end."""


class ConfigError(GeometryError):
    """Invalid regression configuration."""
