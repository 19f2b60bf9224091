"""Numerical tolerances used across the library."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Global tolerance set.

    ``integration`` bounds ODE residuals and speed drift, ``geometric`` the
    identities checked on surfaces and comparison triangles, ``angular`` the
    orthogonality and direction checks (radians).
    """

    integration: float = 1e-8
    geometric: float = 1e-6
    angular: float = 1e-4
    ideal: float = 1e-6
    tangency: float = 1e-4
    max_iter: int = 200

    def scaled(self, factor: float) -> "Tolerances":
        """Return a copy with every float tolerance multiplied by ``factor``."""
        if factor <= 0:
            raise ValueError("tolerance scale must be positive")
        updates = {
            f.name: getattr(self, f.name) * factor
            for f in fields(self)
            if isinstance(getattr(self, f.name), float)
        }
        return replace(self, **updates)


DEFAULT = Tolerances()
