"""The weighted area condition and its critical gradient strength.

Existence of states with maximum in (alpha, beta] is governed by
positivity of the tail integral

    H(s, L) = int_s^{gamma2} f(eta) a(eta)^{1/(p-1)}
              exp(-(p/(p-1)) L int_0^eta g/a) d eta

for every s below the tail.  This module evaluates H and its extrema
over s (in scaled log-space arithmetic, so gradient strengths to
L ~ -10^4 stay finite), decides the area condition with a shrinking
right-window stabilization, brackets and bisects the critical strength
beyond which the condition fails, and samples the boundary growth
ratio f(s)/(beta-s)^{p-1} that rules flat-core states out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .funcs import FunctionSpec
from .quadrature import (
    AnchoredCurve,
    ScaledValue,
    SplineCurve,
    cumulative_on_grid,
    integrate,
)

__all__ = [
    "AreaContext", "area_context", "AreaProfile", "CriticalL", "HExtrema",
    "FlatcoreReport", "IndeterminateVerdict",
    "area_integrand", "compute_H", "compute_H_scaled", "extremize_H",
    "h_extrema_scaled", "area_profile", "check_area_condition",
    "find_critical_L", "check_flatcore_criterion",
]

_OVERFLOW_EXP = 600.0


class IndeterminateVerdict(RuntimeError):
    """A verdict that the numerics cannot certify either way."""


@dataclass(frozen=True)
class AreaContext:
    """Shared quadrature state for one (f, g, a, p) quadruple."""

    f: FunctionSpec
    g: FunctionSpec
    a: FunctionSpec | None
    p: float
    tol: float
    beta: float
    q_curve: SplineCurve              # int_0^s g/a
    f_zeros: tuple[float, ...]        # sign changes of f inside (0, beta)

    @property
    def c_exp(self) -> float:
        return self.p / (self.p - 1.0)

    def prefactor(self, eta) -> np.ndarray:
        out = np.asarray(self.f(eta), dtype=float)
        if self.a is not None:
            out = out * np.asarray(self.a(eta), dtype=float) ** (1.0 / (self.p - 1.0))
        return out

    def exponent(self, L: float) -> Callable:
        c = self.c_exp
        return lambda eta: -c * L * self.q_curve(eta)


def _find_sign_changes(fn, lo: float, hi: float, n: int = 1024) -> tuple[float, ...]:
    s = np.linspace(lo, hi, n)
    v = np.asarray(fn(s), dtype=float)
    out = []
    for i in np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0):
        out.append(float(brentq(lambda x: float(fn(np.array([x]))[0]),
                                float(s[i]), float(s[i + 1]), xtol=1e-14)))
    return tuple(out)


def area_context(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    a: FunctionSpec | None = None,
    tol: float = 1e-10,
) -> AreaContext:
    if not p > 1:
        raise ValueError("need p > 1")
    beta = float(f.beta)
    if a is None:
        goa = lambda s: np.asarray(g(s), dtype=float)
    else:
        goa = lambda s: np.asarray(g(s), dtype=float) / np.asarray(a(s), dtype=float)
    q_curve = SplineCurve(goa, 0.0, beta, n=2049)
    zeros = _find_sign_changes(lambda s: np.asarray(f(s), dtype=float), 0.0, beta)
    return AreaContext(f=f, g=g, a=a, p=float(p), tol=float(tol), beta=beta,
                       q_curve=q_curve, f_zeros=zeros)


def area_integrand(f, g, p: float, L: float, a=None, eta: float = 0.0) -> float:
    """Pointwise weighted integrand; switches to log-space past exponents
    of magnitude 600 and reports the location on true overflow."""
    eta_arr = np.array([float(eta)])
    if a is None:
        q = integrate(lambda x: np.asarray(g(x), dtype=float), 0.0, float(eta), 1e-13)
    else:
        q = integrate(lambda x: np.asarray(g(x), dtype=float)
                      / np.asarray(a(x), dtype=float), 0.0, float(eta), 1e-13)
    w = -(p / (p - 1.0)) * L * q
    pre = float(np.asarray(f(eta_arr), dtype=float)[0])
    if a is not None:
        pre *= float(np.asarray(a(eta_arr), dtype=float)[0]) ** (1.0 / (p - 1.0))
    if abs(w) <= _OVERFLOW_EXP:
        return pre * math.exp(w)
    # log-space: exp(w) alone overflows; the product may still be finite
    if pre == 0.0:
        return 0.0
    log_abs = math.log(abs(pre)) + w
    if log_abs > 700.0:
        raise OverflowError(
            f"area integrand overflows at eta={eta!r} (log magnitude {log_abs:.3g})")
    return math.copysign(math.exp(log_abs), pre)


def _mass_grid(ctx: AreaContext, lo: float, hi: float, L: float,
               extra=None) -> np.ndarray:
    """Nodes on [lo, hi] dense enough for single-panel gap quadrature of
    the weighted integrand (bounded exponent variation per gap)."""
    base = np.linspace(lo, hi, 257)
    w = -ctx.c_exp * L * ctx.q_curve(base)
    span = float(np.max(w) - np.min(w))
    pts = [base]
    if span > 0.0:
        n_w = max(1, int(math.ceil(span / 0.5)))
        targets = np.min(w) + np.arange(n_w + 1) * (span / n_w)
        order = np.argsort(w, kind="mergesort")
        pts.append(np.interp(targets, w[order], base[order]))
    if extra is not None:
        arr = np.asarray(extra, dtype=float)
        pts.append(arr[(arr >= lo) & (arr <= hi)])
    grid = np.unique(np.concatenate(pts))
    keep = np.concatenate([[True], np.diff(grid) > 1e-13 * max(1.0, hi - lo)])
    return grid[keep]


def compute_H_scaled(ctx: AreaContext, s: float, gamma2: float, L: float) -> ScaledValue:
    """H(s, L) = int_s^{gamma2} of the weighted integrand, in scaled form."""
    if s >= gamma2:
        return ScaledValue(0.0, 0.0)
    grid = _mass_grid(ctx, s, gamma2, L, extra=ctx.f_zeros)
    shift = float(np.max(-ctx.c_exp * L * ctx.q_curve(grid)))
    c = ctx.c_exp

    def shifted(eta):
        return ctx.prefactor(eta) * np.exp(-c * L * ctx.q_curve(eta) - shift)

    vals = cumulative_on_grid(shifted, grid, tol=ctx.tol * 1e-2)
    return ScaledValue(float(vals[-1]), shift)


def compute_H(ctx: AreaContext, s: float, gamma2: float, L: float) -> float:
    """Plain-float H(s, L); raises OverflowError outside double range."""
    return compute_H_scaled(ctx, s, gamma2, L).to_float()


@dataclass(frozen=True)
class HExtrema:
    h_min: ScaledValue
    s_argmin: float
    h_max: ScaledValue
    s_argmax: float

    def ratio_max_over_min(self) -> float:
        return self.h_max.ratio(self.h_min)


def h_extrema_scaled(
    ctx: AreaContext,
    gamma1: float,
    gamma2: float,
    L: float,
    n_grid: int = 129,
) -> HExtrema:
    """Extrema of s -> H(s, L) over [0, gamma1].

    dH/ds = -(weighted integrand), whose sign is the sign of f, so the
    interior extrema sit exactly at the sign changes of f; those points
    are merged into the evaluation grid along with a dense fallback.
    """
    if not 0.0 <= gamma1 < gamma2 <= ctx.beta + 1e-12:
        raise ValueError("need 0 <= gamma1 < gamma2 <= beta")
    if n_grid < 64:
        raise ValueError("grid resolution must be >= 64")
    eval_nodes = np.unique(np.concatenate([
        np.linspace(0.0, gamma1, n_grid),
        [z for z in ctx.f_zeros if z < gamma1],
    ]))
    grid = _mass_grid(ctx, 0.0, gamma2, L, extra=np.concatenate(
        [eval_nodes, np.asarray(ctx.f_zeros, dtype=float)]))
    shift = float(np.max(-ctx.c_exp * L * ctx.q_curve(grid)))
    c = ctx.c_exp

    def shifted(eta):
        return ctx.prefactor(eta) * np.exp(-c * L * ctx.q_curve(eta) - shift)

    cum = cumulative_on_grid(shifted, grid, tol=ctx.tol * 1e-2)
    total = cum[-1]
    idx = np.searchsorted(grid, eval_nodes)
    h_vals = total - cum[idx]          # mantissas of H(eval_nodes)

    i_min = int(np.argmin(h_vals))
    i_max = int(np.argmax(h_vals))
    return HExtrema(
        h_min=ScaledValue(float(h_vals[i_min]), shift),
        s_argmin=float(eval_nodes[i_min]),
        h_max=ScaledValue(float(h_vals[i_max]), shift),
        s_argmax=float(eval_nodes[i_max]),
    )


def extremize_H(
    ctx: AreaContext,
    gamma1: float,
    gamma2: float,
    L: float,
    n_grid: int = 129,
) -> tuple[float, float, float, float]:
    """(h_min, s_argmin, h_max, s_argmax) as plain floats."""
    ex = h_extrema_scaled(ctx, gamma1, gamma2, L, n_grid)
    return (ex.h_min.to_float(), ex.s_argmin, ex.h_max.to_float(), ex.s_argmax)


@dataclass(frozen=True)
class AreaProfile:
    """Sampled map s -> H(s, L) with extrema and the condition verdict."""

    gamma1: float
    gamma2: float
    L: float
    p: float
    s_grid: np.ndarray
    H_values: np.ndarray
    h_min: float
    h_max: float
    s_argmin: float
    s_argmax: float
    condition_holds: bool
    margin: float


def area_profile(
    ctx: AreaContext,
    L: float,
    gamma1: float | None = None,
    gamma2: float | None = None,
    n_grid: int = 129,
) -> AreaProfile:
    """Profile of H over [0, gamma1] (defaults: gamma1 = alpha, gamma2 = beta)."""
    g1 = float(ctx.f.alpha) if gamma1 is None else float(gamma1)
    g2 = ctx.beta if gamma2 is None else float(gamma2)
    ex = h_extrema_scaled(ctx, g1, g2, L, n_grid)
    eval_nodes = np.unique(np.concatenate([
        np.linspace(0.0, g1, n_grid), [z for z in ctx.f_zeros if z < g1]]))
    grid = _mass_grid(ctx, 0.0, g2, L, extra=eval_nodes)
    shift = ex.h_min.log_scale
    c = ctx.c_exp

    def shifted(eta):
        return ctx.prefactor(eta) * np.exp(-c * L * ctx.q_curve(eta) - shift)

    cum = cumulative_on_grid(shifted, grid, tol=ctx.tol * 1e-2)
    idx = np.searchsorted(grid, eval_nodes)
    scale = math.exp(min(shift, _OVERFLOW_EXP))
    if shift > _OVERFLOW_EXP:
        raise OverflowError(
            f"H profile at L={L} exceeds double range; use the scaled API")
    H_vals = (cum[-1] - cum[idx]) * scale
    holds, margin = check_area_condition_ctx(ctx, L)
    return AreaProfile(
        gamma1=g1, gamma2=g2, L=float(L), p=ctx.p,
        s_grid=eval_nodes, H_values=H_vals,
        h_min=ex.h_min.to_float(), h_max=ex.h_max.to_float(),
        s_argmin=ex.s_argmin, s_argmax=ex.s_argmax,
        condition_holds=holds, margin=margin,
    )


def check_area_condition_ctx(
    ctx: AreaContext,
    L: float,
    delta0: float | None = None,
) -> tuple[bool, float]:
    """Decide  inf_{s in [0, beta - delta)} H(s, L) > 0  with a shrinking
    window: the trailing window [beta - delta, beta) is excluded (H is
    forced to zero at beta) and delta is halved until the verdict is
    stable three times in a row.

    Raises IndeterminateVerdict when the final margin is within the
    quadrature tolerance of zero, or when the verdict keeps flipping.
    """
    beta = ctx.beta
    delta = beta / 16.0 if delta0 is None else float(delta0)

    verdicts: list[bool] = []
    margin_scaled: ScaledValue | None = None
    for _ in range(10):
        ex = h_extrema_scaled(ctx, beta - delta, beta, L)
        margin_scaled = ex.h_min
        verdicts.append(ex.h_min.mantissa > 0.0)
        if len(verdicts) >= 4 and len(set(verdicts[-4:])) == 1:
            break
        delta *= 0.5
    else:
        raise IndeterminateVerdict(
            f"area-condition verdict did not stabilize at L={L}")

    if abs(margin_scaled.mantissa) < 100.0 * ctx.tol:
        raise IndeterminateVerdict(
            f"margin at L={L} is within quadrature tolerance of zero "
            f"(mantissa {margin_scaled.mantissa:.3g} at scale "
            f"e^{margin_scaled.log_scale:.3g})")
    holds = margin_scaled.mantissa > 0.0
    try:
        margin = margin_scaled.to_float()
    except OverflowError:
        margin = math.copysign(math.inf, margin_scaled.mantissa)
    return holds, margin


def check_area_condition(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    L: float,
    a: FunctionSpec | None = None,
    tol: float = 1e-10,
) -> tuple[bool, float]:
    """Spec-level entry point; see check_area_condition_ctx."""
    return check_area_condition_ctx(area_context(f, g, p, a, tol), L)


@dataclass(frozen=True)
class CriticalL:
    """The threshold gradient strength: the condition holds on (-inf, value)."""

    value: float                      # +inf when f >= 0
    bracket: tuple[float, float] | None = None
    achieved_margin_below: float | None = None
    achieved_margin_above: float | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def _h_min_sign(ctx: AreaContext, L: float) -> tuple[int, ScaledValue]:
    # sign decided on [0, alpha]: past alpha the integrand is nonnegative,
    # so the infimum over [0, beta) shares the sign of this minimum
    ex = h_extrema_scaled(ctx, float(ctx.f.alpha), ctx.beta, L)
    return ex.h_min.sign, ex.h_min


def find_critical_L(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    a: FunctionSpec | None = None,
    L_lo_hint: float = -1.0,
    L_hi_hint: float = 1.0,
    tol_L: float = 1e-6,
    max_expansions: int = 80,
    tol: float = 1e-10,
) -> CriticalL:
    """Bracket and bisect the critical gradient strength.

    A nonnegative f admits every L (returns +inf).  Otherwise the margin
    is positive for L negative enough and negative for L large, so the
    bracket expands geometrically until the sign flips and then bisects
    on the sign of the minimum of H.
    """
    ctx = area_context(f, g, p, a, tol)
    if not f.changes_sign():
        return CriticalL(value=math.inf)

    lo, hi = float(L_lo_hint), float(L_hi_hint)
    if lo > hi:
        lo, hi = hi, lo
    sign_lo, m_lo = _h_min_sign(ctx, lo)
    for _ in range(max_expansions):
        if sign_lo > 0:
            break
        lo = lo * 2.0 if lo < 0 else -1.0
        sign_lo, m_lo = _h_min_sign(ctx, lo)
    else:
        raise RuntimeError(
            f"no positive margin found down to L={lo}; last margin mantissa "
            f"{m_lo.mantissa:.3g}")
    sign_hi, m_hi = _h_min_sign(ctx, hi)
    for _ in range(max_expansions):
        if sign_hi < 0:
            break
        hi = hi * 2.0 if hi > 0 else 1.0
        sign_hi, m_hi = _h_min_sign(ctx, hi)
    else:
        raise RuntimeError(
            f"no negative margin found up to L={hi}; last margin mantissa "
            f"{m_hi.mantissa:.3g}")

    while hi - lo > tol_L:
        mid = 0.5 * (lo + hi)
        sg, m = _h_min_sign(ctx, mid)
        if sg > 0:
            lo, m_lo = mid, m
        elif sg < 0:
            hi, m_hi = mid, m
        else:
            # an exact zero: the boundary itself
            lo = hi = mid
            break

    def _as_float(sv: ScaledValue) -> float:
        try:
            return sv.to_float()
        except OverflowError:
            return math.copysign(math.inf, sv.mantissa)

    return CriticalL(
        value=0.5 * (lo + hi), bracket=(lo, hi),
        achieved_margin_below=_as_float(m_lo),
        achieved_margin_above=_as_float(m_hi),
    )


@dataclass(frozen=True)
class FlatcoreReport:
    """Boundedness of f(s)/(beta-s)^{p-1} as s -> beta^-.

    ``bounded`` is None when the ratio keeps growing but slower than any
    sampled power (indeterminate).
    """

    bounded: bool | None
    sup_ratio: float
    decade_maxima: tuple[float, ...]

    def __iter__(self):
        yield self.bounded
        yield self.sup_ratio


def check_flatcore_criterion(
    f: FunctionSpec,
    p: float,
    beta: float | None = None,
    window: float = 0.5,
    decades: int = 10,
    per_decade: int = 16,
) -> FlatcoreReport:
    """Sample r(s) = f(s)/(beta-s)^{p-1} on decade-refined points s -> beta.

    bounded   : the last three decade maxima agree within a factor two
                and their increments shrink;
    unbounded : the maxima keep growing past that factor;
    None      : steady sub-power growth (logarithmic-type divergence).
    """
    b = float(f.beta) if beta is None else float(beta)
    if not 0.0 < window < b:
        raise ValueError("window must lie in (0, beta)")
    maxima = []
    for k in range(decades):
        d_hi = window * 10.0 ** (-k)
        offsets = d_hi * 10.0 ** (-np.linspace(0.0, 1.0, per_decade, endpoint=False))
        s = b - offsets
        realized = b - s  # exact float distances, free of cancellation noise
        r = np.asarray(f(s), dtype=float) / realized ** (p - 1.0)
        maxima.append(float(np.max(r)))
    m = np.array(maxima)

    if np.max(np.abs(m)) == 0.0:
        return FlatcoreReport(True, 0.0, tuple(maxima))

    if m[-1] <= m[-3]:
        # not growing under refinement: the supremum was already seen
        return FlatcoreReport(True, float(np.max(m)), tuple(maxima))

    growth = m[-1] / max(m[-3], 1e-300)
    if growth > 2.0:
        return FlatcoreReport(False, float(np.max(m)), tuple(maxima))

    increments = np.abs(np.diff(m[-4:]))
    scale = max(abs(m[-1]), 1e-300)
    if increments[-1] <= 0.5 * max(increments[0], 1e-300) or increments[-1] <= 1e-6 * scale:
        return FlatcoreReport(True, float(m[-1]), tuple(maxima))
    # within 2x but still climbing every decade: cannot certify a limit
    return FlatcoreReport(None, float(m[-1]), tuple(maxima))
