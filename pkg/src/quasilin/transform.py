"""The change of variables that absorbs the gradient term.

For the problem  -Lap_p u + L g(u)|grad u|^p = lambda f(u)  the map

    Psi(s) = int_0^s a(eta)^{1/(p-1)} exp(-(L/(p-1)) int_0^eta g/a) d eta

(a == 1 unless a diffusion coefficient is supplied) turns solutions u
into solutions v = Psi(u) of the gradient-free problem
-Lap_p v = lambda ftilde(v) with

    ftilde(v) = f(Psi^{-1}(v)) exp(-L int_0^{Psi^{-1}(v)} g/a).

This module tabulates Psi on [0, beta] with certified interpolation
error, inverts it, and builds ftilde together with its antiderivative
Ftilde, which is recovered through the substitution identity

    Ftilde(Psi(s2)) - Ftilde(Psi(s1))
        = int_{s1}^{s2} f a^{1/(p-1)} exp(-(p/(p-1)) L int_0^eta g/a) d eta

so that both sides of the weighted area condition are available from
independent quadratures.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from .domain import SolutionProfile
from .funcs import FunctionSpec
from .quadrature import (
    AnchoredCurve,
    QuadratureError,
    ScaledValue,
    SplineCurve,
    cumulative_on_grid,
    integrate_weighted_exp,
)

__all__ = [
    "TransformTable",
    "TransformedNonlinearity",
    "build_psi",
    "psi_inverse",
    "transformed_nonlinearity",
    "pushforward_solution",
    "pullback_solution",
    "log_psi_scaled",
    "area_weight_fn",
]

_MAX_EXPONENT = 690.0  # ceiling for any exponent that must live in a double


@dataclass(frozen=True)
class TransformTable:
    """Monotone tabulation of Psi on [0, beta] with inverse lookup."""

    p: float
    L: float
    beta: float
    tol: float
    g_spec: FunctionSpec
    a_spec: FunctionSpec | None
    s_grid: np.ndarray
    psi_values: np.ndarray
    log_dpsi_values: np.ndarray
    _q_curve: SplineCurve = field(repr=False)         # int_0^s g/a
    _psi_curve: AnchoredCurve = field(repr=False)     # int_0^s Psi'
    _inv_guess: PchipInterpolator = field(repr=False)  # s as a function of log1p(psi)

    @property
    def dpsi_values(self) -> np.ndarray:
        return np.exp(self.log_dpsi_values)

    @property
    def vmax(self) -> float:
        return float(self.psi_values[-1])

    # -- forward map ----------------------------------------------------

    def weight_integral(self, s) -> np.ndarray:
        """Q(s) = int_0^s g/a  (equals G when a is absent)."""
        return self._q_curve(s)

    def log_dpsi(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = -(self.L / (self.p - 1.0)) * self._q_curve(s)
        if self.a_spec is not None:
            out = out + np.log(self.a_spec(s)) / (self.p - 1.0)
        return out

    def psi(self, s) -> np.ndarray:
        """Psi(s), vectorized, quadrature-grade accuracy."""
        return self._psi_curve(s)

    def psi_scalar(self, s: float) -> float:
        return float(self.psi(np.array([float(s)]))[0])

    # -- inverse map ----------------------------------------------------

    def psi_inv(self, v) -> np.ndarray:
        """Psi^{-1}(v) for v in [0, Psi(beta)], Newton-polished."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        slack = 10.0 * self.tol * max(1.0, self.vmax)
        if np.any(v < -slack) or np.any(v > self.vmax + slack):
            bad = float(v[(v < -slack) | (v > self.vmax + slack)][0])
            raise ValueError(
                f"value {bad!r} outside the range [0, {self.vmax!r}] of the transform")
        v = np.clip(v, 0.0, self.vmax)
        s = np.clip(self._inv_guess(np.log1p(v)), 0.0, self.beta)
        target = 0.5 * self.tol * np.maximum(1.0, np.abs(v))
        for _ in range(12):
            resid = self.psi(s) - v
            if np.all(np.abs(resid) <= target):
                break
            step = resid * np.exp(-self.log_dpsi(s))
            s = np.clip(s - step, 0.0, self.beta)
        else:
            s = self._bisect_failures(v, s, target)
        return s

    def _bisect_failures(self, v, s, target) -> np.ndarray:
        resid = self.psi(s) - v
        out = s.copy()
        for i in np.flatnonzero(np.abs(resid) > target):
            out[i] = brentq(
                lambda t: self.psi_scalar(t) - v[i],
                0.0, self.beta, xtol=self.tol, rtol=4 * np.finfo(float).eps)
        return out

    # -- export ---------------------------------------------------------

    def export_csv(self) -> str:
        buf = io.StringIO()
        buf.write("s,psi,dpsi\n")
        for s, psi, ld in zip(self.s_grid, self.psi_values, self.log_dpsi_values):
            buf.write(f"{s:.17g},{psi:.17g},{math.exp(ld):.17g}\n")
        return buf.getvalue()

    def export_json(self) -> str:
        return json.dumps({
            "p": self.p, "L": self.L, "beta": self.beta, "tol": self.tol,
            "s": [float(x) for x in self.s_grid],
            "psi": [float(x) for x in self.psi_values],
            "dpsi": [float(x) for x in self.dpsi_values],
        })


def _require_positive_a(a_spec: FunctionSpec | None, beta: float) -> None:
    if a_spec is None:
        return
    s = np.linspace(0.0, beta, 257)
    vals = a_spec(s)
    if np.min(vals) <= 0.0:
        bad = float(s[int(np.argmin(vals))])
        raise ValueError(f"diffusion coefficient must be positive; a({bad}) <= 0")


def _g_over_a(g: FunctionSpec, a: FunctionSpec | None) -> Callable:
    if a is None:
        return lambda s: np.asarray(g(s), dtype=float)
    return lambda s: np.asarray(g(s), dtype=float) / np.asarray(a(s), dtype=float)


def _dedupe(points: np.ndarray, span: float) -> np.ndarray:
    """Sorted nodes with near-coincident points merged (endpoints pinned)."""
    pts = np.sort(np.asarray(points, dtype=float))
    eps = 1e-13 * max(1.0, span)
    out = [pts[0]]
    for x in pts[1:]:
        if x - out[-1] > eps:
            out.append(float(x))
    out[-1] = float(pts[-1])
    return np.array(out)


def build_psi(
    g: FunctionSpec,
    a: FunctionSpec | None,
    p: float,
    L: float,
    beta: float,
    tol: float = 1e-10,
) -> TransformTable:
    """Tabulate the change of variables on [0, beta].

    The node set is refined until (i) the exponent of the heaviest
    integrand used downstream varies by at most ~0.7 per gap, so a single
    15-point panel between nodes is at machine accuracy, and (ii) the
    cubic-interpolation error of Psi at panel midpoints is below ``tol``
    (relative for values above 1); a monotone interpolant over the same
    nodes seeds the inverse.

    Raises QuadratureError when the exponent leaves double range; the
    offending location is reported.
    """
    if not p > 1:
        raise ValueError("need p > 1")
    if not beta > 0:
        raise ValueError("need beta > 0")
    _require_positive_a(a, beta)

    goa = _g_over_a(g, a)
    q_curve = SplineCurve(goa, 0.0, beta, n=2049)

    def log_dpsi_of(s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = -(L / (p - 1.0)) * q_curve(s)
        if a is not None:
            out = out + np.log(np.asarray(a(s), dtype=float)) / (p - 1.0)
        return out

    # overflow guard on the heaviest exponent used downstream
    scan = q_curve.s_grid
    q_scan = q_curve.values
    heavy = np.abs((p / (p - 1.0)) * L * q_scan)
    light = np.abs(log_dpsi_of(scan))
    worst = np.maximum(heavy, light)
    if np.max(worst) > _MAX_EXPONENT:
        s_bad = float(scan[int(np.argmax(worst))])
        raise QuadratureError(
            f"integrand overflow at s={s_bad:.6g}: exponent magnitude "
            f"{np.max(worst):.3g} exceeds {_MAX_EXPONENT:g}; "
            "use the log-space diagnostics for this parameter range")

    # initial grid: uniform nodes plus equal-exponent-increment nodes, so
    # the node density follows the exponential weight (geometric toward
    # the heavy end)
    grid = set(np.linspace(0.0, beta, 65))
    w_area = (p / (p - 1.0)) * L * q_scan
    w_span = float(np.max(w_area) - np.min(w_area))
    if w_span > 0.0:
        n_w = max(1, int(math.ceil(w_span / 0.7)))
        targets = np.min(w_area) + np.arange(n_w + 1) * (w_span / n_w)
        order = np.argsort(w_area, kind="mergesort")
        grid.update(np.interp(targets, w_area[order], scan[order]))
    s_grid = _dedupe(np.array(sorted(grid)), beta)

    def dpsi_fn(s):
        return np.exp(log_dpsi_of(s))

    for _ in range(24):
        mids = 0.5 * (s_grid[:-1] + s_grid[1:])
        both = np.sort(np.concatenate([s_grid, mids]))
        cum = cumulative_on_grid(dpsi_fn, both, tol=min(tol, 1e-12) * 1e-2)
        psi_grid = cum[0::2]
        true_mid = cum[1::2]
        spline = CubicSpline(s_grid, psi_grid)
        err = np.abs(spline(mids) - true_mid)
        # error target is relative to the local scale of Psi: its value or
        # (for steep exponential weights) the increment a slope of that
        # size produces across the domain
        scale = np.maximum(1.0, np.abs(true_mid))
        scale = np.maximum(scale, beta * dpsi_fn(mids))
        bad = err > tol * scale
        if not np.any(bad):
            break
        grow = bad.copy()
        grow[:-1] |= bad[1:]
        grow[1:] |= bad[:-1]
        s_grid = _dedupe(np.concatenate([s_grid, mids[grow]]), beta)
    else:
        raise QuadratureError(
            f"interpolation tolerance {tol:g} not reached while tabulating the transform")

    log_dpsi_grid = log_dpsi_of(s_grid)
    psi_curve = AnchoredCurve(dpsi_fn, s_grid, psi_grid)
    # monotone guess for the inverse, on a log axis so huge transform
    # values at strongly negative L cannot overflow the slope formulas;
    # saturated tails (L > 0) collapse to float-equal values and are
    # dropped -- any point of a flat stretch is a valid preimage
    log_psi_grid = np.log1p(psi_grid)
    keep = np.concatenate([[True], np.diff(log_psi_grid) > 0.0])
    inv_guess = PchipInterpolator(log_psi_grid[keep], s_grid[keep])

    return TransformTable(
        p=float(p), L=float(L), beta=float(beta), tol=float(tol),
        g_spec=g, a_spec=a,
        s_grid=s_grid, psi_values=psi_grid, log_dpsi_values=log_dpsi_grid,
        _q_curve=q_curve, _psi_curve=psi_curve, _inv_guess=inv_guess,
    )


def psi_inverse(table: TransformTable, v: float) -> float:
    """Scalar inverse lookup; v must lie in [0, Psi(beta)]."""
    return float(table.psi_inv(np.array([float(v)]))[0])


@dataclass(frozen=True)
class TransformedNonlinearity:
    """ftilde and its antiderivative Ftilde on [0, Psi(beta)]."""

    table: TransformTable
    f_spec: FunctionSpec
    v_grid: np.ndarray
    f_tilde_values: np.ndarray
    F_values: np.ndarray
    _area_curve: AnchoredCurve = field(repr=False)

    @property
    def vmax(self) -> float:
        return self.table.vmax

    @property
    def valpha(self) -> float:
        return float(self.table.psi(np.array([self.f_spec.alpha]))[0])

    def value(self, v) -> np.ndarray:
        """ftilde(v) = f(Psi^{-1}(v)) * exp(-L * int_0^{Psi^{-1}(v)} g/a)."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        s = self.table.psi_inv(v)
        w = -self.table.L * self.table.weight_integral(s)
        return np.asarray(self.f_spec(s), dtype=float) * np.exp(w)

    def antider(self, v) -> np.ndarray:
        """Ftilde(v) = int_0^v ftilde, through the substitution identity."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return self._area_curve(self.table.psi_inv(v))

    def antider_of_s(self, s) -> np.ndarray:
        """Ftilde(Psi(s)) without an inverse round-trip."""
        return self._area_curve(s)

    def __call__(self, v):
        return self.value(v)


def area_weight_fn(f: FunctionSpec, table: TransformTable) -> Callable:
    """The weighted-area integrand f a^{1/(p-1)} e^{-(p/(p-1)) L Q} in s."""
    c = table.p / (table.p - 1.0)

    def fn(s):
        s = np.asarray(s, dtype=float)
        w = -c * table.L * table.weight_integral(s)
        out = np.asarray(f(s), dtype=float) * np.exp(w)
        if table.a_spec is not None:
            out = out * np.asarray(table.a_spec(s), dtype=float) ** (1.0 / (table.p - 1.0))
        return out

    return fn


def transformed_nonlinearity(f: FunctionSpec, table: TransformTable) -> TransformedNonlinearity:
    """Build ftilde for a validated nonlinearity over the table's interval."""
    if f.kind != "nonlinearity-f":
        raise ValueError("expected a nonlinearity-f spec")
    if abs(f.beta - table.beta) > 1e-12 * max(1.0, table.beta):
        raise ValueError(
            f"table was built for beta={table.beta}, spec has beta={f.beta}")

    fn = area_weight_fn(f, table)
    area_vals = cumulative_on_grid(fn, table.s_grid, tol=min(table.tol, 1e-12) * 0.1)
    area_curve = AnchoredCurve(fn, table.s_grid, area_vals)

    s = table.s_grid
    w = -table.L * table.weight_integral(s)
    f_tilde_vals = np.asarray(f(s), dtype=float) * np.exp(w)

    return TransformedNonlinearity(
        table=table, f_spec=f, v_grid=table.psi_values.copy(),
        f_tilde_values=f_tilde_vals, F_values=area_vals, _area_curve=area_curve)


def pushforward_solution(u_profile: SolutionProfile, table: TransformTable) -> SolutionProfile:
    """Map a u-profile to v = Psi(u), pointwise."""
    u = u_profile.values
    slack = 10.0 * table.tol * max(1.0, table.beta)
    if np.any(u < -slack) or np.any(u > table.beta + slack):
        raise ValueError("profile values out of [0, beta]")
    v = table.psi(np.clip(u, 0.0, table.beta))
    return u_profile.with_values(v, variable="v")


def pullback_solution(v_profile: SolutionProfile, table: TransformTable) -> SolutionProfile:
    """Map a v-profile back through the inverse transform, pointwise."""
    return v_profile.with_values(table.psi_inv(v_profile.values), variable="u")


def log_psi_scaled(
    g: FunctionSpec,
    p: float,
    L: float,
    s: float,
    tol: float = 1e-12,
    a: FunctionSpec | None = None,
) -> ScaledValue:
    """Psi_L(s) as a scaled value, valid for exponents far beyond doubles.

    Used by the asymptotic diagnostics, which need Psi_L(gamma)^p only in
    ratios against equally scaled area integrals.
    """
    goa = _g_over_a(g, a)
    hi = max(s, 1e-12)
    q_curve = SplineCurve(goa, 0.0, hi, n=2049)

    def exponent(x):
        out = -(L / (p - 1.0)) * q_curve(x)
        if a is not None:
            out = out + np.log(np.asarray(a(x), dtype=float)) / (p - 1.0)
        return out

    return integrate_weighted_exp(
        lambda x: np.ones_like(np.asarray(x, dtype=float)),
        exponent, 0.0, s, tol)
