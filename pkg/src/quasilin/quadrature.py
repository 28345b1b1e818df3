"""Adaptive Gauss-Kronrod quadrature and log-scaled integral helpers.

Everything downstream (change of variables, area profiles, time maps)
reduces to 1-D integrals of smooth or piecewise-smooth integrands, often
carrying exponential weights e^{W(x)} whose exponent can reach +-40000.
Two representations are used:

* plain floats, for integrals that fit comfortably in double range;
* ``ScaledValue`` pairs ``mantissa * exp(log_scale)``, for Laplace-type
  integrals where only ratios are ever needed.

Integrands are evaluated on whole node arrays at once, so callers must
supply vectorized callables (numpy in, numpy out).
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "ScaledValue",
    "kronrod_panel",
    "panel_batch",
    "integrate",
    "integrate_weighted_exp",
    "Antiderivative",
]


class QuadratureError(RuntimeError):
    """Raised when an integral cannot be computed to the requested tolerance."""


# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK dqk15).
_XK = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
])

# full symmetric node/weight tables on [-1, 1]
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])          # 15 increasing nodes
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[1:-1:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def kronrod_panel(fn, a: float, b: float) -> tuple[float, float]:
    """Integrate ``fn`` over one panel [a, b]; returns (value, error estimate)."""
    h = 0.5 * (b - a)
    x = 0.5 * (a + b) + h * _NODES
    y = np.asarray(fn(x), dtype=float)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise QuadratureError(f"non-finite integrand sample at x={bad!r}")
    vk = h * float(np.dot(_WEIGHTS_K, y))
    vg = h * float(np.dot(_WEIGHTS_G, y))
    return vk, abs(vk - vg)


def panel_batch(fn, lo, hi) -> np.ndarray:
    """One Kronrod panel per interval, vectorized over many intervals.

    Intended for short gaps between cached anchors, where a single
    15-point rule is already at machine accuracy. No error control.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    h = 0.5 * (hi - lo)
    x = 0.5 * (lo + hi)[:, None] + h[:, None] * _NODES[None, :]
    y = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(y)):
        bad = x.ravel()[~np.isfinite(y.ravel())][0]
        raise QuadratureError(f"non-finite integrand sample at x={bad!r}")
    return h * (y @ _WEIGHTS_K)


def integrate(
    fn,
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    limit: int = 4000,
    points: Sequence[float] | None = None,
) -> float:
    """Adaptive panel-splitting quadrature of ``fn`` over [a, b].

    ``points`` seeds the initial subdivision (useful when the caller knows
    where the integrand concentrates).  The absolute tolerance applies to
    the summed per-panel error estimate; failing to reach it within
    ``limit`` panel splits raises :class:`QuadratureError`.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0

    cuts = [a, b]
    if points:
        cuts.extend(float(p) for p in points if a < p < b)
    cuts = sorted(set(cuts))

    heap: list[tuple[float, float, float, float]] = []  # (-err, lo, hi, val)
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, err = kronrod_panel(fn, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val))
        total += val
        total_err += err

    splits = 0
    while total_err > tol and splits < limit:
        neg_err, lo, hi, val = heapq.heappop(heap)
        if neg_err == 0.0:
            heapq.heappush(heap, (neg_err, lo, hi, val))
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # interval at float resolution; its error is irreducible
            heapq.heappush(heap, (0.0, lo, hi, val))
            continue
        v1, e1 = kronrod_panel(fn, lo, mid)
        v2, e2 = kronrod_panel(fn, mid, hi)
        total += (v1 + v2) - val
        total_err += (e1 + e2) + neg_err  # neg_err == -old error
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        splits += 1

    if total_err > tol and total_err > 1e-13 * max(1.0, abs(total)):
        raise QuadratureError(
            f"tolerance {tol:g} not reached on [{a:g}, {b:g}]: "
            f"estimated error {total_err:g} after {splits} splits"
        )
    return sign * total


@dataclass(frozen=True)
class ScaledValue:
    """A real number stored as ``mantissa * exp(log_scale)``.

    The mantissa carries the sign; the scale absorbs exponential growth,
    so ratios of ScaledValues stay finite long after the plain values
    would overflow.
    """

    mantissa: float
    log_scale: float

    @property
    def sign(self) -> int:
        return 0 if self.mantissa == 0.0 else (1 if self.mantissa > 0 else -1)

    def to_float(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        log_abs = self.log_abs()
        if log_abs > 700.0:
            raise OverflowError(
                f"scaled value exp({log_abs:.3g}) exceeds double range"
            )
        return self.mantissa * math.exp(self.log_scale)

    def log_abs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def ratio(self, other: "ScaledValue") -> float:
        """self / other as a plain float."""
        if other.mantissa == 0.0:
            raise ZeroDivisionError("ratio with zero ScaledValue")
        r = self.mantissa / other.mantissa
        return r * math.exp(self.log_scale - other.log_scale)

    def scaled_by(self, factor: float, log_shift: float = 0.0) -> "ScaledValue":
        return ScaledValue(self.mantissa * factor, self.log_scale + log_shift)


def integrate_weighted_exp(
    prefactor,
    exponent,
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    limit: int = 4000,
    points: Sequence[float] | None = None,
) -> ScaledValue:
    """Compute ``int_a^b prefactor(x) * exp(exponent(x)) dx`` in scaled form.

    The exponent maximum over a scan grid is factored out before any
    exponential is taken, so the result is well-defined for exponents far
    outside double range.  ``tol`` is absolute on the mantissa, i.e.
    relative to ``exp(max exponent)``.
    """
    if a == b:
        return ScaledValue(0.0, 0.0)
    lo, hi = (a, b) if a < b else (b, a)
    scan = np.linspace(lo, hi, 257)
    w = np.asarray(exponent(scan), dtype=float)
    if not np.all(np.isfinite(w)):
        bad = scan[~np.isfinite(w)][0]
        raise QuadratureError(f"non-finite exponent sample at x={bad!r}")
    shift = float(np.max(w))

    # Seed the subdivision with a geometric cascade toward the exponent
    # peak: the mass of a Laplace-type integrand sits in a window there
    # that can be arbitrarily narrow, which plain bisection from wide
    # panels fails to detect (the error estimate under-reports spikes
    # living between quadrature nodes).
    peak = float(scan[int(np.argmax(w))])
    span = hi - lo
    offsets = span * 2.0 ** (-np.arange(1, 48, dtype=float))
    hints = list(peak - offsets) + list(peak + offsets)
    if points:
        hints.extend(points)

    def scaled_integrand(x):
        e = np.asarray(exponent(x), dtype=float) - shift
        return np.asarray(prefactor(x), dtype=float) * np.exp(e)

    val = integrate(scaled_integrand, a, b, tol, limit=limit, points=hints)
    return ScaledValue(val, shift)


def _gap_values(fn, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Integrals over many short gaps, with a two-level error check.

    Gaps whose halved-panel estimate disagrees beyond ``tol`` fall back
    to fully adaptive quadrature.
    """
    if lo.size == 0:
        return np.zeros(0)
    mid = 0.5 * (lo + hi)
    coarse = panel_batch(fn, lo, hi)
    fine = panel_batch(fn, lo, mid) + panel_batch(fn, mid, hi)
    err = np.abs(fine - coarse)
    out = fine
    thresh = np.maximum(tol, 1e-13 * np.abs(fine))
    bad = np.flatnonzero(err > thresh)
    for i in bad:
        out[i] = integrate(fn, float(lo[i]), float(hi[i]), float(thresh[i]))
    return out


def cumulative_on_grid(fn, grid: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """``int_{grid[0]}^{grid[i]} fn`` for every node of a sorted grid."""
    grid = np.asarray(grid, dtype=float)
    gaps = _gap_values(fn, grid[:-1], grid[1:], tol)
    return np.concatenate([[0.0], np.cumsum(gaps)])


class AnchoredCurve:
    """``ref + int_{base}^{s} fn`` anchored at fixed grid values.

    Evaluation adds one 15-point panel from the nearest left node, so
    the grid must be fine enough for a single panel per gap to be at the
    target accuracy.  Immutable and thread-safe.
    """

    def __init__(self, fn, s_grid: np.ndarray, values: np.ndarray):
        self.fn = fn
        self.s_grid = np.asarray(s_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)

    @classmethod
    def tabulate(cls, fn, lo: float, hi: float, n: int = 2049,
                 tol: float = 1e-13, extra: np.ndarray | None = None,
                 base: float | None = None) -> "AnchoredCurve":
        grid = np.linspace(lo, hi, n)
        if extra is not None:
            grid = np.unique(np.concatenate([grid, extra]))
        vals = cumulative_on_grid(fn, grid, tol)
        if base is not None and base != lo:
            offset = np.interp(base, grid, vals)
            vals = vals - offset
        return cls(fn, grid, vals)

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        j = np.clip(np.searchsorted(self.s_grid, s, side="right") - 1,
                    0, len(self.s_grid) - 1)
        return self.values[j] + panel_batch(self.fn, self.s_grid[j], s)


class SplineCurve:
    """A certified cubic-spline stand-in for a smooth antiderivative.

    Built from anchored cumulative values and refined until the spline
    matches fresh quadrature at every panel midpoint to ``rel_tol``
    (relative to the value scale plus the local slope scale).  Far
    cheaper to evaluate than panel corrections when the curve sits in
    the innermost loop of a nested quadrature.
    """

    def __init__(self, fn, lo: float, hi: float, n: int = 513,
                 rel_tol: float = 5e-14, max_rounds: int = 12):
        from scipy.interpolate import CubicSpline

        grid = np.linspace(lo, hi, n)
        span = hi - lo
        for _ in range(max_rounds):
            mids = 0.5 * (grid[:-1] + grid[1:])
            both = np.empty(grid.size + mids.size)
            both[0::2] = grid
            both[1::2] = mids
            cum = cumulative_on_grid(fn, both, tol=1e-15)
            vals = cum[0::2]
            true_mid = cum[1::2]
            spline = CubicSpline(grid, vals)
            scale = np.maximum.reduce([
                np.ones_like(true_mid), np.abs(true_mid),
                span * np.abs(np.asarray(fn(mids), dtype=float))])
            bad = np.abs(spline(mids) - true_mid) > rel_tol * scale
            if not np.any(bad):
                break
            grow = bad.copy()
            grow[:-1] |= bad[1:]
            grow[1:] |= bad[:-1]
            grid = np.sort(np.concatenate([grid, mids[grow]]))
        self.fn = fn
        self.s_grid = grid
        self.values = vals
        self._spline = spline

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self._spline(np.clip(s, self.s_grid[0], self.s_grid[-1]))


class Antiderivative:
    """Cached antiderivative ``F(s) = int_{base}^{s} fn``.

    Evaluations accumulate anchor points (s, F(s)); a new request
    integrates only the gaps from already-known anchors, so sweeping a
    grid costs one short panel per node.  ``F(base) == 0`` exactly, and
    the result is monotone whenever ``fn`` has constant sign, because
    every gap is integrated with positive Kronrod weights.

    Thread-safe: the anchor cache is lock-protected; cached and freshly
    integrated values agree to the construction tolerance.
    """

    def __init__(self, fn, tol: float = 1e-12, base: float = 0.0):
        self._fn = fn
        self.tol = float(tol)
        self.base = float(base)
        self._lock = threading.Lock()
        self._ax = np.array([self.base])
        self._av = np.array([0.0])

    def __call__(self, s) -> float:
        return float(self.on_grid([float(s)])[0])

    def on_grid(self, xs) -> np.ndarray:
        """Antiderivative values on an arbitrary point set (any order)."""
        xs = np.asarray(xs, dtype=float)
        flat = xs.ravel()
        uniq = np.unique(flat)
        with self._lock:
            ax, av = self._ax, self._av

        pos = np.searchsorted(ax, uniq)
        is_known = (pos < ax.size) & (ax[np.minimum(pos, ax.size - 1)] == uniq)
        if not np.all(is_known):
            new = uniq[~is_known]
            all_x = np.concatenate([ax, new])
            order = np.argsort(all_x, kind="mergesort")
            all_x = all_x[order]
            known_mask = np.concatenate(
                [np.ones(ax.size, bool), np.zeros(new.size, bool)])[order]
            vals = np.where(known_mask, np.concatenate([av, np.zeros(new.size)])[order], np.nan)

            first_known = int(np.argmax(known_mask))
            need = ~known_mask[1:]
            need[:first_known] = True  # gaps left of the first anchor
            gaps = np.zeros(all_x.size - 1)
            gaps[need] = _gap_values(self._fn, all_x[:-1][need], all_x[1:][need],
                                     self.tol * 0.125)
            prefix = np.concatenate([[0.0], np.cumsum(gaps)])
            # reference anchor for each node: nearest known at-or-before it,
            # or the first known anchor for the leading block; chains between
            # a node and its reference only cross freshly computed gaps
            idx = np.arange(all_x.size)
            ref = np.where(known_mask, idx, -1)
            ref = np.maximum.accumulate(ref)
            ref[ref < 0] = first_known
            base_vals = np.where(known_mask, vals, 0.0)
            vals = prefix + (base_vals - prefix)[ref]
            with self._lock:
                self._ax, self._av = all_x, vals
            ax, av = all_x, vals

        pos = np.searchsorted(ax, uniq)
        lookup = av[pos]
        idx = np.searchsorted(uniq, flat)
        return lookup[idx].reshape(xs.shape)
