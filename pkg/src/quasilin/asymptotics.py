"""Numerical corroboration of the strong-gradient limit statements.

Three families of diagnostics over decreasing gradient strengths L:

* ``taylor_ratio``    -- the normalized Laplace integral
  (e^{-L G(g2)} / (-L G'(g2)))^{-1} int_{g1}^{g2} e^{-L G} -> 1;
* ``hratio_diagnostic`` -- max/min of the area profile tend to the same
  growth, h_max/h_min -> 1;
* ``growth_lower_bound`` / ``psi_power_ratio`` -- the candidate constant
  C(L) = h_min (-L) e^{(p/(p-1)) L G(g2)} stabilizes at a positive value
  (Laplace limit (p-1) f(g2) / (p g(g2))), and Psi_L(g2)^p / h_min
  decays like (-L)^{-(p-1)}.

Everything is computed in scaled log-space arithmetic: the diagnostics
stay finite for L down to -10^4.  These checks falsify, they do not
prove; their convergence bands are engineering choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .area import AreaContext, area_context, h_extrema_scaled
from .funcs import FunctionSpec
from .quadrature import AnchoredCurve, integrate_weighted_exp
from .transform import log_psi_scaled

__all__ = [
    "LimitDiagnostic",
    "default_L_sequence",
    "taylor_ratio",
    "hratio_diagnostic",
    "growth_lower_bound",
    "growth_limit_constant",
    "growth_diagnostic",
    "psi_power_ratio",
]


def default_L_sequence(k_max: int = 5, base: float = -5.0) -> tuple[float, ...]:
    """Geometric default: -5, -10, ..., -5 * 2^k_max."""
    return tuple(base * 2.0 ** k for k in range(k_max + 1))


@dataclass(frozen=True)
class LimitDiagnostic:
    """One convergence experiment along a decreasing L sequence."""

    name: str
    L_sequence: tuple[float, ...]
    ratio_values: tuple[float, ...]
    claimed_limit: float
    converged: bool
    last_gap: float
    fitted_exponent: float | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "L": list(self.L_sequence),
            "ratio": list(self.ratio_values),
            "claimed_limit": self.claimed_limit,
            "converged": self.converged,
            "last_gap": self.last_gap,
            "fitted_exponent": self.fitted_exponent,
            "notes": self.notes,
        }


def _check_sequence(L_sequence) -> tuple[float, ...]:
    seq = tuple(float(L) for L in L_sequence)
    if not seq or any(L >= 0 for L in seq):
        raise ValueError("need a sequence of strictly negative L values")
    if any(b >= a for a, b in zip(seq, seq[1:])):
        raise ValueError("L sequence must be strictly decreasing")
    return seq


def _gaps_converged(gaps: list[float], band: float) -> bool:
    """Final three gaps nonincreasing and the last one inside the band."""
    tail = gaps[-3:] if len(gaps) >= 3 else gaps
    mono = all(b <= a * (1.0 + 1e-9) + 1e-15 for a, b in zip(tail, tail[1:]))
    return mono and gaps[-1] <= band


def taylor_ratio(
    g: FunctionSpec,
    p_unused: float | None,
    gamma1: float,
    gamma2: float,
    L: float,
    tol: float = 1e-12,
) -> float:
    """Normalized Laplace integral; tends to 1 as L -> -inf.

    The statement does not involve p (hence the unused slot kept for
    interface symmetry with the other diagnostics).
    """
    if L >= 0:
        raise ValueError("need L < 0")
    if gamma1 >= gamma2:
        raise ValueError("need gamma1 < gamma2")
    g2v = float(np.asarray(g(gamma2), dtype=float))
    if g2v <= 0:
        raise ValueError("need g(gamma2) > 0 for the normalizer")
    G = AnchoredCurve.tabulate(lambda s: np.asarray(g(s), dtype=float),
                               min(0.0, gamma1), gamma2, n=2049)
    sv = integrate_weighted_exp(
        lambda x: np.ones_like(np.asarray(x, dtype=float)),
        lambda x: -L * G(x), gamma1, gamma2, tol)
    # ratio = integral * (-L g(gamma2)) * e^{L G(gamma2)}
    log_norm = -L * float(G(np.array([gamma2]))[0])
    return sv.mantissa * (-L) * g2v * math.exp(sv.log_scale - log_norm)


def hratio_diagnostic(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    gamma1: float,
    gamma2: float,
    L_sequence=None,
    band: float = 0.02,
    ctx: AreaContext | None = None,
) -> LimitDiagnostic:
    """h_max(L) / h_min(L) along the sequence; claimed limit 1."""
    seq = _check_sequence(L_sequence or default_L_sequence())
    ctx = ctx or area_context(f, g, p)
    ratios = []
    for k, L in enumerate(seq):
        ex = h_extrema_scaled(ctx, gamma1, gamma2, L)
        if ex.h_min.sign <= 0:
            raise ValueError(
                f"h_min <= 0 at entry {k} (L={L}): the sequence does not "
                "start negative enough for the profile to be positive")
        ratios.append(ex.ratio_max_over_min())
    gaps = [abs(r - 1.0) for r in ratios]
    return LimitDiagnostic(
        name="area-extrema-ratio", L_sequence=seq, ratio_values=tuple(ratios),
        claimed_limit=1.0, converged=_gaps_converged(gaps, band),
        last_gap=gaps[-1])


def growth_lower_bound(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    gamma1: float,
    gamma2: float,
    L: float,
    ctx: AreaContext | None = None,
) -> float:
    """Candidate constant C(L) = h_min(L) (-L) e^{(p/(p-1)) L G(gamma2)}.

    The exponential factors cancel in scaled arithmetic, so this stays
    finite for any L < 0.
    """
    if L >= 0:
        raise ValueError("need L < 0")
    ctx = ctx or area_context(f, g, p)
    ex = h_extrema_scaled(ctx, gamma1, gamma2, L)
    q2 = float(ctx.q_curve(np.array([gamma2]))[0])
    log_norm = -ctx.c_exp * L * q2
    return ex.h_min.mantissa * (-L) * math.exp(ex.h_min.log_scale - log_norm)


def growth_limit_constant(f: FunctionSpec, g: FunctionSpec, p: float,
                          gamma2: float) -> float:
    """Laplace-method limit of C(L): (p-1) f(gamma2) / (p g(gamma2))."""
    fv = float(np.asarray(f(gamma2), dtype=float))
    gv = float(np.asarray(g(gamma2), dtype=float))
    return (p - 1.0) * fv / (p * gv)


def growth_diagnostic(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    gamma1: float,
    gamma2: float,
    L_sequence=None,
    rel_band: float = 0.3,
) -> LimitDiagnostic:
    """C(L) along the sequence against its Laplace limit."""
    seq = _check_sequence(L_sequence or default_L_sequence())
    ctx = area_context(f, g, p)
    values = [growth_lower_bound(f, g, p, gamma1, gamma2, L, ctx=ctx) for L in seq]
    limit = growth_limit_constant(f, g, p, gamma2)
    gaps = [abs(v - limit) / max(abs(limit), 1e-300) for v in values]
    converged = all(v > 0 for v in values) and gaps[-1] <= rel_band
    return LimitDiagnostic(
        name="growth-constant", L_sequence=seq, ratio_values=tuple(values),
        claimed_limit=limit, converged=converged, last_gap=gaps[-1],
        notes="positive plateau against the Laplace limit")


def psi_power_ratio(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    gamma1: float,
    gamma2: float,
    L_sequence=None,
    exponent_slack: float = 0.2,
) -> LimitDiagnostic:
    """Psi_L(gamma2)^p / h_min(L) -> 0, with decay rate ~ (-L)^{-(p-1)}.

    The fitted log-log slope must reach at least (p-1) - slack.
    """
    seq = _check_sequence(L_sequence or default_L_sequence())
    ctx = area_context(f, g, p)
    ratios = []
    for k, L in enumerate(seq):
        ex = h_extrema_scaled(ctx, gamma1, gamma2, L)
        if ex.h_min.sign <= 0:
            raise ValueError(
                f"h_min <= 0 at entry {k} (L={L}): sequence not negative enough")
        psi_sv = log_psi_scaled(g, p, L, gamma2)
        log_ratio = p * psi_sv.log_abs() - ex.h_min.log_abs()
        ratios.append(math.exp(log_ratio))
    logs = np.log(np.array(ratios))
    slopes = np.polyfit(np.log(-np.array(seq)), logs, 1)
    fitted_decay = -float(slopes[0])
    gaps = list(np.abs(ratios))
    converged = (_gaps_converged(gaps, math.inf)
                 and ratios[-1] <= 0.1 * ratios[0]
                 and fitted_decay >= (p - 1.0) - exponent_slack)
    return LimitDiagnostic(
        name="transform-power-ratio", L_sequence=seq, ratio_values=tuple(ratios),
        claimed_limit=0.0, converged=converged, last_gap=gaps[-1],
        fitted_exponent=fitted_decay,
        notes="decay exponent target p-1 within slack")
