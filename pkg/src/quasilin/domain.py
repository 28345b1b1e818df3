"""Domain descriptions and solution profiles shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DomainSpec", "SolutionProfile"]


@dataclass(frozen=True)
class DomainSpec:
    """A 1-D interval (0, length) or a ball of given radius in R^N."""

    kind: str                 # "interval" | "ball"
    size: float               # length of the interval, or ball radius
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in ("interval", "ball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not self.size > 0:
            raise ValueError("domain size must be positive")
        if self.kind == "interval" and self.dimension != 1:
            raise ValueError("an interval is one-dimensional")
        if self.kind == "ball" and self.dimension < 2:
            raise ValueError("a ball domain requires dimension >= 2")


@dataclass(frozen=True)
class SolutionProfile:
    """A radially/axially sampled solution with its parameter stamp.

    ``x`` spans [0, length] for intervals and [0, radius] for balls;
    ``values`` are the solution samples (u for the quasilinear problem,
    v = Psi(u) for its transformed counterpart, per ``variable``).
    """

    domain: DomainSpec
    x: np.ndarray
    values: np.ndarray
    lam: float
    L: float
    p: float
    sup_norm: float = field(default=float("nan"))
    residual_norm: float | None = None
    branch_id: int = 0
    rho: float | None = None      # transformed-solution peak value
    accepted: bool = True
    tangent: bool = False
    variable: str = "u"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise ValueError("x and values must be 1-D arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)
        if np.isnan(self.sup_norm):
            object.__setattr__(self, "sup_norm", float(np.max(v)) if v.size else 0.0)

    def with_values(self, values: np.ndarray, variable: str) -> "SolutionProfile":
        return SolutionProfile(
            domain=self.domain, x=self.x, values=np.asarray(values, dtype=float),
            lam=self.lam, L=self.L, p=self.p,
            sup_norm=float(np.max(values)),
            residual_norm=self.residual_norm, branch_id=self.branch_id,
            rho=self.rho, accepted=self.accepted, tangent=self.tangent,
            variable=variable)
