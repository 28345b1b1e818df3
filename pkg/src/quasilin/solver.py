"""Time-map and shooting solvers for the reduced gradient-free problem.

On an interval of length ``ell`` the positive symmetric states of
-(|v'|^{p-2} v')' = lambda ftilde(v), v(0) = v(ell) = 0, are classified
by their peak value rho through the time map

    T(rho) = ((p-1)/p)^{1/p} int_0^rho (Ftilde(rho) - Ftilde(t))^{-1/p} dt,
    lambda(rho) = (2 T(rho) / ell)^p,

valid exactly when Ftilde(rho) > Ftilde(t) for all t < rho (the area
condition at level rho).  The endpoint singularity is removed by the
substitution t = rho (1 - sigma^m) with m = p/(p-1), after which the
integrand is bounded at the peak.

Balls are handled by outward shooting of the radial system in
(v, w = r^{N-1}|v'|^{p-2} v') with a series launch at the origin, using
the p-homogeneity lambda -> lambda (r*/R)^p to rescale the first zero
r* onto the target radius.

Solutions are pulled back through the change of variables and verified
against the ORIGINAL quasilinear equation by an independent conservative
finite-difference residual on an error-equidistributed mesh; the
reported residual is relative to the forcing scale lambda * max|f|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .area import area_context, h_extrema_scaled
from .domain import DomainSpec, SolutionProfile
from .funcs import FunctionSpec
from .quadrature import AnchoredCurve, QuadratureError, cumulative_on_grid, integrate
from .transform import TransformTable, TransformedNonlinearity, build_psi, transformed_nonlinearity

__all__ = [
    "Nonlinearity1D", "TimeMapCurve", "SweepRecord",
    "build_time_map", "time_map", "lam_of_rho", "solve_interval", "solve_radial",
    "maximal_solution", "lambda_min_of_L", "lambda_bar_min_of_L",
    "interval_residual", "sweep", "NoAdmissibleRange",
]


class NoAdmissibleRange(RuntimeError):
    """No admissible peak level exists: the area condition fails."""


@dataclass(frozen=True)
class Nonlinearity1D:
    """A reduced nonlinearity the solvers can consume directly.

    ``value`` and ``antider`` must be vectorized; ``vmax`` bounds the
    admissible peak range, ``valpha`` marks the lower end of the target
    norm window (0 when not meaningful).
    """

    value: Callable[[np.ndarray], np.ndarray]
    antider: Callable[[np.ndarray], np.ndarray]
    vmax: float
    valpha: float = 0.0
    table: TransformTable | None = None
    f_spec: FunctionSpec | None = None

    @classmethod
    def linear(cls, vmax: float = 10.0) -> "Nonlinearity1D":
        """ftilde(v) = v: the classical principal-eigenvalue oracle."""
        return cls(value=lambda v: np.asarray(v, dtype=float),
                   antider=lambda v: 0.5 * np.asarray(v, dtype=float) ** 2,
                   vmax=float(vmax))

    @classmethod
    def from_transform(cls, tnl: TransformedNonlinearity) -> "Nonlinearity1D":
        return cls(value=tnl.value, antider=tnl.antider, vmax=tnl.vmax,
                   valpha=tnl.valpha, table=tnl.table, f_spec=tnl.f_spec)


def _as_nonlinearity(ftilde) -> Nonlinearity1D:
    if isinstance(ftilde, Nonlinearity1D):
        return ftilde
    if isinstance(ftilde, TransformedNonlinearity):
        return Nonlinearity1D.from_transform(ftilde)
    raise TypeError(f"cannot interpret {type(ftilde).__name__} as a nonlinearity")


# ---------------------------------------------------------------------------
# time map
# ---------------------------------------------------------------------------

_DEGENERATE_TOP = 1e-8


def _grading_exponent(nl: Nonlinearity1D, p: float, rho: float) -> float:
    """Substitution power m: p/(p-1) for a simple zero of the bracket at
    the peak, doubled when ftilde(rho) is degenerate there."""
    m = p / (p - 1.0)
    top = float(nl.value(np.array([rho]))[0])
    if abs(top) < _DEGENERATE_TOP:
        m *= 2.0
    return m


def _bracket_near_peak(nl: Nonlinearity1D, rho: float, t: np.ndarray,
                       d: np.ndarray, far: np.ndarray) -> np.ndarray:
    """Ftilde(rho) - Ftilde(t) without cancellation noise close to the
    peak: the midpoint form d * ftilde((t+rho)/2) is exact to O(d^2)
    relative and replaces the catastrophic difference of близких values."""
    switch = 1e-6 * max(1.0, rho)
    near = d < switch
    if not np.any(near):
        return far
    mid_f = nl.value(np.clip(0.5 * (t + rho), 0.0, nl.vmax))
    return np.where(near, d * mid_f, far)


def _time_integrand(nl: Nonlinearity1D, p: float, rho: float, m: float) -> Callable:
    F_rho = float(nl.antider(np.array([rho]))[0])

    def fn(sigma):
        sigma = np.asarray(sigma, dtype=float)
        d = rho * sigma ** m          # rho - t, computed forward
        t = rho - d
        far = F_rho - nl.antider(t)
        bracket = np.maximum(_bracket_near_peak(nl, rho, t, d, far), 1e-300)
        return bracket ** (-1.0 / p) * sigma ** (m - 1.0)

    return fn


def _sigma_head(nl: Nonlinearity1D, p: float, rho: float, m: float,
                fn: Callable, sigma_min: float) -> float:
    """Contribution of [0, sigma_min], where the substituted integrand
    behaves like sigma^e with e = m - 1 - k m / p (k = order of the
    bracket zero at the peak).  e = 0 in the regular regime; a flat
    (degenerate) top with p <= 2 diverges logarithmically and the head
    is dropped (the time map is blowing up there anyway)."""
    k_top = 2.0 if abs(float(nl.value(np.array([rho]))[0])) < _DEGENERATE_TOP else 1.0
    e = m - 1.0 - k_top * m / p
    if e <= -1.0 + 1e-12:
        return 0.0
    return float(fn(np.array([sigma_min]))[0]) * sigma_min / (e + 1.0)


def _sigma_min_for(rho: float, m: float) -> float:
    # the midpoint bracket form is noise-free, so only a nominal cutoff
    # is needed to keep the head correction analytic
    return 1e-10


def time_map(nl, p: float, rho: float, rel_tol: float = 1e-9) -> float:
    """Half-length of the interval supporting the peak-rho state at
    lambda = 1.  Raises QuadratureError when the level is inadmissible
    enough for the integral to diverge numerically."""
    nl = _as_nonlinearity(nl)
    m = _grading_exponent(nl, p, rho)
    fn = _time_integrand(nl, p, rho, m)
    sigma_min = _sigma_min_for(rho, m)
    Z = _sigma_curve(nl, p, rho, m, sigma_min)
    val = float(Z.values[-1]) + _sigma_head(nl, p, rho, m, fn, sigma_min)
    c_p = ((p - 1.0) / p) ** (1.0 / p)
    return c_p * m * rho * val


def lam_of_rho(nl, p: float, rho: float, ell: float, rel_tol: float = 1e-9) -> float:
    """lambda(rho) on an interval of length ell."""
    T = time_map(nl, p, rho, rel_tol)
    return (2.0 * T / ell) ** p


@dataclass(frozen=True)
class TimeMapCurve:
    """lambda(rho) sampled over the admissible peak range."""

    p: float
    domain: DomainSpec
    rho_grid: np.ndarray
    admissible: np.ndarray          # bool per node
    T_values: np.ndarray            # nan where inadmissible/failed
    lambda_values: np.ndarray       # nan where inadmissible/failed
    nl: Nonlinearity1D = field(repr=False)

    @property
    def vmax(self) -> float:
        return self.nl.vmax


def _admissibility(nl: Nonlinearity1D, rho_grid: np.ndarray) -> np.ndarray:
    """Strict running-maximum test of Ftilde on the grid (plus t = 0)."""
    F = nl.antider(rho_grid)
    scale = max(float(np.max(np.abs(F))), 1e-300)
    eps = 1e-12 * scale
    runmax = np.maximum.accumulate(np.concatenate([[0.0], F]))[:-1]
    return F > runmax + eps


def _fast_time_batch(nl: Nonlinearity1D, p: float, rhos: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-composite time-map estimates for many peak levels at once.

    Returns (T, relative error estimate); rows whose Gauss/Kronrod
    estimates disagree must be recomputed with the adaptive path.
    """
    from .quadrature import _NODES, _WEIGHTS_G, _WEIGHTS_K  # rule tables

    edges = np.unique(np.concatenate([
        np.geomspace(1e-7, 1e-2, 20), np.linspace(1e-2, 1.0, 72)]))
    mid = 0.5 * (edges[:-1] + edges[1:])
    halfw = 0.5 * np.diff(edges)
    sig = (mid[:, None] + halfw[:, None] * _NODES[None, :]).ravel()  # (P*15,)

    tops = np.abs(nl.value(rhos))
    T = np.full(rhos.shape, np.nan)
    err = np.full(rhos.shape, np.inf)
    c_p = ((p - 1.0) / p) ** (1.0 / p)
    for degenerate in (False, True):
        rows = np.flatnonzero((tops < _DEGENERATE_TOP) == degenerate)
        if rows.size == 0:
            continue
        m = p / (p - 1.0) * (2.0 if degenerate else 1.0)
        rr = rhos[rows][:, None]
        d = rr * sig[None, :] ** m
        t = rr - d
        F_r = nl.antider(rhos[rows])[:, None]
        far = F_r - nl.antider(t.ravel()).reshape(t.shape)
        switch = 1e-6 * np.maximum(1.0, rr)
        mid_f = nl.value(np.clip(0.5 * (t + rr), 0.0, nl.vmax).ravel()).reshape(t.shape)
        bracket = np.maximum(np.where(d < switch, d * mid_f, far), 1e-300)
        vals = bracket ** (-1.0 / p) * sig[None, :] ** (m - 1.0)
        vals = vals.reshape(len(rows), len(mid), 15)
        pk = (vals @ _WEIGHTS_K) * halfw[None, :]
        pg = (vals @ _WEIGHTS_G) * halfw[None, :]
        # rows whose cancellation-safe cutoff exceeds a panel edge drop
        # the panels below it and take the head at that edge instead
        smin = np.array([_sigma_min_for(float(r), m) for r in rhos[rows]])
        edge_idx = np.searchsorted(edges, smin, side="left")
        kmask = np.arange(len(mid))[None, :] >= edge_idx[:, None]
        total_k = np.sum(pk * kmask, axis=1)
        total_g = np.sum(pg * kmask, axis=1)
        k_top = 2.0 if degenerate else 1.0
        e = m - 1.0 - k_top * m / p
        if e > -1.0 + 1e-12:
            edge_sig = edges[np.minimum(edge_idx, len(edges) - 1)]
            d_edge = rhos[rows] * edge_sig ** m
            tt = rhos[rows] - d_edge
            far_e = nl.antider(rhos[rows]) - nl.antider(tt)
            mid_fe = nl.value(np.clip(0.5 * (tt + rhos[rows]), 0.0, nl.vmax))
            br = np.maximum(np.where(d_edge < 1e-6 * np.maximum(1.0, rhos[rows]),
                                     d_edge * mid_fe, far_e), 1e-300)
            head = br ** (-1.0 / p) * edge_sig ** (m - 1.0) * edge_sig / (e + 1.0)
            total_k = total_k + head
            total_g = total_g + head
        T[rows] = c_p * m * rhos[rows] * total_k
        err[rows] = np.abs(total_k - total_g) / np.maximum(np.abs(total_k), 1e-300)
    return T, err


def build_time_map(
    ftilde,
    p: float,
    rho_resolution: int = 512,
    domain: DomainSpec | None = None,
    rel_tol: float = 1e-9,
) -> TimeMapCurve:
    """Sample the time map on a grid covering (0, vmax).

    The grid carries a geometric cluster at the top so the blow-up of
    lambda(rho) toward the upper zero is visible.  A vectorized
    fixed-composite rule evaluates the whole grid at once; levels where
    its embedded error estimate is poor (near-degenerate brackets) are
    recomputed adaptively.  Inadmissible levels are flagged, quadrature
    failures become nan entries.
    """
    nl = _as_nonlinearity(ftilde)
    domain = domain or DomainSpec("interval", 1.0)
    if domain.kind != "interval":
        raise ValueError("the time map is an interval construction")
    if not p > 1:
        raise ValueError("need p > 1")
    n_top = min(64, rho_resolution // 8)
    base = np.linspace(nl.vmax / rho_resolution, nl.vmax, rho_resolution - n_top,
                       endpoint=False)
    top = nl.vmax * (1.0 - 10.0 ** (-np.linspace(2.0, 9.0, n_top)))
    rho_grid = np.unique(np.concatenate([base, top]))

    admissible = _admissibility(nl, rho_grid)
    T = np.full(rho_grid.shape, np.nan)
    ell = domain.size
    idx = np.flatnonzero(admissible)
    if idx.size:
        T_fast, err_fast = _fast_time_batch(nl, p, rho_grid[idx])
        good = err_fast <= 3e-6
        T[idx[good]] = T_fast[good]
        for i in idx[~good]:
            try:
                T[i] = time_map(nl, p, float(rho_grid[i]), rel_tol)
            except (QuadratureError, OverflowError):
                pass
    with np.errstate(over="ignore"):
        lam = np.where(np.isfinite(T), (2.0 * T / ell) ** p, np.nan)
    return TimeMapCurve(p=float(p), domain=domain, rho_grid=rho_grid,
                        admissible=admissible, T_values=T, lambda_values=lam,
                        nl=nl)


def _find_roots(curve: TimeMapCurve, lam: float, rel_tol: float = 1e-9
                ) -> list[tuple[float, bool]]:
    """Peak levels rho with lambda(rho) = lam: (rho, tangency flag)."""
    nl, p, ell = curve.nl, curve.p, curve.domain.size
    rho, lv = curve.rho_grid, curve.lambda_values
    ok = curve.admissible & np.isfinite(lv)
    roots: list[tuple[float, bool]] = []
    for i in range(len(rho) - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        d0, d1 = lv[i] - lam, lv[i + 1] - lam
        if d0 == 0.0:
            roots.append((float(rho[i]), False))
            continue
        if d0 * d1 < 0.0:
            r = brentq(lambda x: lam_of_rho(nl, p, x, ell, rel_tol) - lam,
                       float(rho[i]), float(rho[i + 1]),
                       xtol=1e-10 * max(1.0, nl.vmax), rtol=1e-15)
            roots.append((float(r), False))
    # tangencies: interior minima of |lambda - lam| that nearly touch zero
    resid = np.abs(lv - lam)
    for i in range(1, len(rho) - 1):
        if not (ok[i - 1] and ok[i] and ok[i + 1]):
            continue
        if resid[i] <= resid[i - 1] and resid[i] <= resid[i + 1] \
                and resid[i] <= 1e-8 * max(lam, 1.0) \
                and (lv[i - 1] - lam) * (lv[i + 1] - lam) > 0.0:
            if not any(abs(rho[i] - r) <= 1e-6 * curve.vmax for r, _ in roots):
                roots.append((float(rho[i]), True))
    roots.sort()
    return roots


# ---------------------------------------------------------------------------
# interval profiles and the independent residual
# ---------------------------------------------------------------------------

def _sigma_curve(nl: Nonlinearity1D, p: float, rho: float, m: float,
                 sigma_min: float) -> AnchoredCurve:
    """Cumulative Z(sigma) = int_{sigma_min}^{sigma} of the substituted
    integrand, on a grid graded at the cutoff and refined by geometric
    cascades around interior near-touches of the bracket."""
    fn = _time_integrand(nl, p, rho, m)
    base = np.unique(np.concatenate([
        np.geomspace(sigma_min, 1e-2, 32),
        np.linspace(1e-2, 1.0, 481),
    ]))
    probe = fn(base)
    finite = probe[np.isfinite(probe)]
    lo = np.percentile(finite, 60) if finite.size else 1.0
    spikes = base[probe > 20.0 * max(lo, 1e-300)]
    extra = []
    if spikes.size:
        offs = 2.0 ** (-np.arange(2, 40, dtype=float))
        for s0 in (float(spikes[0]), float(spikes[-1])):
            extra.append(np.clip(s0 - offs, sigma_min, 1.0))
            extra.append(np.clip(s0 + offs, sigma_min, 1.0))
    grid = np.unique(np.concatenate([base] + extra)) if extra else base
    vals = cumulative_on_grid(fn, grid, tol=1e-13)
    return AnchoredCurve(fn, grid, vals)


def _reconstruct_half(nl: Nonlinearity1D, p: float, lam: float, rho: float,
                      x_half: np.ndarray) -> np.ndarray:
    """v at distances x_half from the boundary (ascending, <= half-length)."""
    m = _grading_exponent(nl, p, rho)
    sigma_min = _sigma_min_for(rho, m)
    Z = _sigma_curve(nl, p, rho, m, sigma_min)
    c_p = ((p - 1.0) / p) ** (1.0 / p)
    C = c_p * lam ** (-1.0 / p) * m * rho
    # the head below sigma_min maps to an O(1e-12) sliver at the center;
    # targets are measured on the resolved part and clipped onto it
    head = _sigma_head(nl, p, rho, m, Z.fn, sigma_min)
    z_total = float(Z(np.array([1.0]))[0])
    targets = (z_total + head) - np.asarray(x_half, dtype=float) / C
    targets = np.clip(targets, 0.0, z_total)

    zg = np.maximum.accumulate(Z.values)
    keep = np.concatenate([[True], np.diff(zg) > 0.0])
    guess = PchipInterpolator(zg[keep], Z.s_grid[keep])
    sigma = np.clip(guess(targets), sigma_min, 1.0)
    fn = Z.fn
    for _ in range(40):
        resid = Z(sigma) - targets
        if np.max(np.abs(resid)) <= 1e-12 * max(1.0, z_total):
            break
        slope = np.maximum(fn(sigma), 1e-300)
        sigma = np.clip(sigma - resid / slope, sigma_min, 1.0)
    return rho * (1.0 - sigma ** m)


def interval_residual(
    x: np.ndarray,
    u: np.ndarray,
    p: float,
    lam: float,
    L: float,
    f,
    g,
    a=None,
    forcing_scale: float | None = None,
) -> tuple[np.ndarray, float]:
    """Conservative finite-difference residual of the original problem
    -(a(u)|u'|^{p-2}u')' + L g(u)|u'|^p - lambda f(u) on the given grid.

    Returns the interior residual samples and their max norm relative to
    the forcing scale lambda * max|f| (or the supplied scale).  Uses
    only the grid values, so it is independent of how the profile was
    built.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    D = np.diff(u) / np.diff(x)
    flux = np.sign(D) * np.abs(D) ** (p - 1.0)
    if a is not None:
        um = 0.5 * (u[:-1] + u[1:])
        flux = flux * np.asarray(a(um), dtype=float)
    xm = 0.5 * (x[:-1] + x[1:])
    dflux = np.diff(flux) / np.diff(xm)
    up = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    ui = u[1:-1]
    R = -dflux + L * np.asarray(g(ui), dtype=float) * np.abs(up) ** p \
        - lam * np.asarray(f(ui), dtype=float)
    if forcing_scale is None:
        if isinstance(f, FunctionSpec):
            grid = np.linspace(f.domain[0], f.domain[1], 512)
        else:
            grid = np.linspace(0.0, float(np.max(u)) or 1.0, 512)
        forcing_scale = lam * max(float(np.max(np.abs(np.asarray(f(grid), dtype=float)))),
                                  1e-300)
    return R, float(np.max(np.abs(R)) / forcing_scale)


def _equidistribute(x: np.ndarray, err: np.ndarray, n: int, ell: float) -> np.ndarray:
    """New symmetric mesh equidistributing an h^2-scaled error indicator."""
    h = np.diff(x)
    # err has one entry per interior node; build per-cell indicator
    node_err = np.concatenate([[err[0]], err, [err[-1]]])
    cell = 0.5 * (node_err[:-1] + node_err[1:])
    curv = cell / np.maximum(h, 1e-300) ** 2
    density = np.sqrt(np.maximum(curv, 0.0))
    density = density + 0.25 * np.mean(density) + 1e-300
    win = max(5, n // 100)
    kernel = np.hanning(2 * win + 1)
    kernel /= kernel.sum()
    density = np.convolve(density, kernel, mode="same")
    density = 0.5 * (density + density[::-1])     # keep the mesh symmetric
    cdf = np.concatenate([[0.0], np.cumsum(density * h)])
    cdf /= cdf[-1]
    xi = np.linspace(0.0, 1.0, n)
    xnew = np.interp(xi, cdf, x)
    xnew = 0.5 * (xnew + (ell - xnew[::-1]))
    xnew[0], xnew[-1] = 0.0, ell
    return np.maximum.accumulate(xnew)


def _profile_on_mesh(nl: Nonlinearity1D, p: float, lam: float, rho: float,
                     ell: float, x: np.ndarray) -> np.ndarray:
    """Profile values on a symmetric mesh: the left half is reconstructed,
    the right half is its exact mirror."""
    half = x[x <= 0.5 * ell + 1e-15]
    v_half = _reconstruct_half(nl, p, lam, rho, half)
    n, k = len(x), len(half)
    v = np.empty(n)
    v[:k] = v_half
    v[k:] = v_half[:n - k][::-1]
    return v


def _build_profile(
    nl: Nonlinearity1D,
    p: float,
    lam: float,
    rho: float,
    domain: DomainSpec,
    L: float,
    branch_id: int,
    tangent: bool,
    n_profile: int = 2001,
    residual_rounds: int = 2,
    residual_accept: float = 1e-4,
) -> SolutionProfile:
    """Reconstruct one interval branch, pull it back, and verify it."""
    ell = domain.size
    x = np.linspace(0.0, ell, n_profile)
    table, f_spec = nl.table, nl.f_spec

    def values_on(xg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = _profile_on_mesh(nl, p, lam, rho, ell, xg)
        if table is not None:
            u = table.psi_inv(np.clip(v, 0.0, nl.vmax))
            # exact mirror symmetry of the pullback as well
            half = len(xg) - len(xg) // 2
            u[half:] = u[:len(xg) // 2][::-1]
        else:
            u = v
        return u, v

    if table is not None and f_spec is not None:
        f_for_res, g_for_res = f_spec, table.g_spec
        a_for_res = table.a_spec
        L_res = table.L
    else:
        # reduced problem: verify against -lap_p v = lam ftilde(v)
        f_for_res = lambda s: nl.value(np.clip(s, 0.0, nl.vmax))
        g_for_res = lambda s: np.zeros_like(np.asarray(s, dtype=float))
        a_for_res = None
        L_res = 0.0

    u = v = None
    res_norm = math.inf
    for _ in range(max(1, residual_rounds + 1)):
        u, v = values_on(x)
        R, res_norm = interval_residual(x, u, p, lam, L_res, f_for_res,
                                        g_for_res, a=a_for_res)
        if residual_rounds == 0:
            break
        x = _equidistribute(x, np.abs(R), n_profile, ell)
        residual_rounds -= 1

    return SolutionProfile(
        domain=domain, x=x, values=u, lam=float(lam), L=float(L), p=float(p),
        sup_norm=float(np.max(u)), residual_norm=res_norm,
        branch_id=branch_id, rho=float(rho),
        accepted=bool(res_norm <= residual_accept), tangent=tangent,
        variable="u" if table is not None else "v")


def solve_interval(
    ftilde,
    p: float,
    lam: float,
    domain: DomainSpec | None = None,
    table: TransformTable | None = None,
    curve: TimeMapCurve | None = None,
    n_profile: int = 2001,
    rho_resolution: int = 512,
    residual_accept: float = 1e-4,
) -> list[SolutionProfile]:
    """All symmetric positive states at parameter ``lam`` on an interval.

    Roots of lambda(rho) = lam are bracketed on the sampled curve and
    bisected; each branch is reconstructed, pulled back through the
    transform, and stamped with the independent residual of the
    original quasilinear equation.  An empty list is a valid outcome.
    """
    nl = _as_nonlinearity(ftilde)
    if table is not None and nl.table is None:
        nl = replace(nl, table=table)
    domain = domain or DomainSpec("interval", 1.0)
    if curve is None:
        curve = build_time_map(nl, p, rho_resolution, domain)
    L = nl.table.L if nl.table is not None else 0.0
    out = []
    for k, (rho, tangent) in enumerate(_find_roots(curve, lam)):
        out.append(_build_profile(nl, p, lam, rho, domain, L, k, tangent,
                                  n_profile, residual_accept=residual_accept))
    return out


# ---------------------------------------------------------------------------
# radial shooting
# ---------------------------------------------------------------------------

def _shoot_first_zero(
    nl: Nonlinearity1D,
    p: float,
    N: int,
    lam: float,
    rho0: float,
    r_limit: float,
    rtol: float = 1e-11,
):
    """Integrate outward from the series launch; returns (r*, solution)
    or (None, solution) when v never reaches zero before r_limit."""
    fval = lambda v: float(nl.value(np.array([min(max(v, 0.0), nl.vmax)]))[0])
    f0 = fval(rho0)
    pp = p / (p - 1.0)
    r0 = 1e-8 * r_limit
    if f0 > 0:
        v0 = rho0 - (lam * f0 / N) ** (1.0 / (p - 1.0)) * (1.0 / pp) * r0 ** pp
    else:
        v0 = rho0
    w0 = -lam * f0 * r0 ** N / N

    def rhs(r, y):
        v, w = y
        grad = math.copysign(abs(w / r ** (N - 1)) ** (1.0 / (p - 1.0)), w)
        return [grad, -lam * r ** (N - 1) * fval(v)]

    def hit_zero(r, y):
        return y[0]
    hit_zero.terminal = True
    hit_zero.direction = -1

    sol = solve_ivp(rhs, (r0, r_limit), [v0, w0], method="DOP853",
                    rtol=rtol, atol=1e-13 * max(1.0, rho0), events=hit_zero,
                    dense_output=True)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0]), sol
    return None, sol


def solve_radial(
    ftilde,
    p: float,
    N: int,
    lam: float,
    radius: float,
    table: TransformTable | None = None,
    rho0: float | None = None,
    n_profile: int = 1001,
    r_budget: float = 50.0,
) -> SolutionProfile | None:
    """Radial state on a ball via outward shooting from height rho0.

    The first zero r* of the shot is rescaled onto the target radius by
    p-homogeneity, adjusting lambda to lam (r*/radius)^p; the returned
    profile carries the adjusted parameter.  None when the shot never
    reaches zero (reported, not fatal).
    """
    nl = _as_nonlinearity(ftilde)
    if table is not None and nl.table is None:
        nl = replace(nl, table=table)
    if N < 1:
        raise ValueError("need dimension >= 1")
    if rho0 is None:
        rho0 = 0.95 * nl.vmax
    if not 0.0 < rho0 < nl.vmax:
        raise ValueError("rho0 must lie in (0, vmax)")
    r_star, sol = _shoot_first_zero(nl, p, N, lam, rho0, r_budget * radius)
    if r_star is None:
        return None
    lam_out = lam * (r_star / radius) ** p
    r = np.linspace(sol.t[0], r_star, n_profile - 1)
    v = np.concatenate([[rho0], np.maximum(sol.sol(r)[0], 0.0)])
    x = np.concatenate([[0.0], r]) * (radius / r_star)
    if nl.table is not None:
        u = nl.table.psi_inv(np.clip(v, 0.0, nl.vmax))
        variable = "u"
    else:
        u, variable = v, "v"
    dom = DomainSpec("ball", radius, max(N, 2)) if N >= 2 else DomainSpec("interval", 2 * radius)
    L = nl.table.L if nl.table is not None else 0.0
    res = _radial_residual(x, u, p, lam_out, L, nl, N)
    return SolutionProfile(
        domain=dom, x=x, values=u, lam=lam_out, L=L, p=float(p),
        sup_norm=float(np.max(u)), residual_norm=res, branch_id=0,
        rho=float(rho0), accepted=True, tangent=False, variable=variable)


def _radial_residual(x, u, p, lam, L, nl: Nonlinearity1D, N: int) -> float:
    """Conservative residual of the original radial equation, skipping
    the coordinate singularity at the origin."""
    if nl.table is None or nl.f_spec is None:
        return math.nan
    f, g, a = nl.f_spec, nl.table.g_spec, nl.table.a_spec
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    D = np.diff(u) / np.diff(x)
    xm = 0.5 * (x[:-1] + x[1:])
    flux = xm ** (N - 1) * np.sign(D) * np.abs(D) ** (p - 1.0)
    if a is not None:
        flux = flux * np.asarray(a(0.5 * (u[:-1] + u[1:])), dtype=float)
    dflux = np.diff(flux) / np.diff(xm)
    ui = u[1:-1]
    xi = x[1:-1]
    up = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    R = -dflux / np.maximum(xi, 1e-300) ** (N - 1) \
        + L * np.asarray(g(ui), dtype=float) * np.abs(up) ** p \
        - lam * np.asarray(f(ui), dtype=float)
    interior = xi > 0.05 * x[-1]
    grid = np.linspace(f.domain[0], f.domain[1], 512)
    scale = lam * max(float(np.max(np.abs(np.asarray(f(grid), dtype=float)))), 1e-300)
    return float(np.max(np.abs(R[interior])) / scale)


# ---------------------------------------------------------------------------
# extremal branches and thresholds
# ---------------------------------------------------------------------------

def maximal_solution(
    ftilde,
    p: float,
    lam: float,
    domain: DomainSpec | None = None,
    table: TransformTable | None = None,
    curve: TimeMapCurve | None = None,
    n_profile: int = 2001,
) -> SolutionProfile | None:
    """The branch with the largest admissible peak at this lambda.

    On intervals the branch set is totally ordered by the peak value, so
    the largest root of lambda(rho) = lam is the maximal state in
    [0, beta]; on balls the largest shooting height is used.  None when
    no branch exists.
    """
    nl = _as_nonlinearity(ftilde)
    if table is not None and nl.table is None:
        nl = replace(nl, table=table)
    domain = domain or DomainSpec("interval", 1.0)
    if domain.kind == "interval":
        if curve is None:
            curve = build_time_map(nl, p, 512, domain)
        roots = _find_roots(curve, lam)
        if not roots:
            return None
        rho, tangent = roots[-1]
        L = nl.table.L if nl.table is not None else 0.0
        return _build_profile(nl, p, lam, rho, domain, L, len(roots) - 1,
                              tangent, n_profile)
    return _radial_maximal(nl, p, lam, domain, n_profile)


def _radial_maximal(nl: Nonlinearity1D, p: float, lam: float,
                    domain: DomainSpec, n_profile: int) -> SolutionProfile | None:
    """Largest shooting height whose rescaled parameter matches lam."""
    N, R = domain.dimension, domain.size

    def lam_of_height(h: float) -> float:
        r_star, _ = _shoot_first_zero(nl, p, N, 1.0, h, 200.0 * R, rtol=1e-10)
        if r_star is None:
            return math.nan
        return (r_star / R) ** p

    heights = nl.vmax * (1.0 - 10.0 ** (-np.linspace(0.3, 8.0, 48)))[::-1]
    vals = np.array([lam_of_height(float(h)) for h in heights])
    best = None
    for i in range(len(heights) - 1, 0, -1):
        a_, b_ = vals[i - 1], vals[i]
        if not (np.isfinite(a_) and np.isfinite(b_)):
            continue
        if (a_ - lam) * (b_ - lam) <= 0.0:
            best = brentq(lambda h: lam_of_height(h) - lam,
                          float(heights[i - 1]), float(heights[i]),
                          xtol=1e-10 * nl.vmax)
            break
    if best is None:
        return None
    return solve_radial(nl, p, N, lam, R, rho0=float(best),
                        n_profile=n_profile)


def _window_indices(curve: TimeMapCurve) -> np.ndarray:
    """Grid indices of admissible levels with peak in [valpha, vmax]."""
    lo = curve.nl.valpha
    ok = curve.admissible & np.isfinite(curve.lambda_values) \
        & (curve.rho_grid >= lo - 1e-12 * max(1.0, curve.vmax))
    return np.flatnonzero(ok)


def _polish_min(curve: TimeMapCurve, j: int) -> float:
    """Golden-section refinement of a grid minimizer of lambda(rho)."""
    nl, p, ell = curve.nl, curve.p, curve.domain.size
    rho, lv = curve.rho_grid, curve.lambda_values

    def f(x):
        try:
            return lam_of_rho(nl, p, x, ell)
        except (QuadratureError, OverflowError):
            return math.inf

    lo = rho[j - 1] if j > 0 and np.isfinite(lv[j - 1]) else rho[j]
    hi = rho[j + 1] if j + 1 < len(rho) and np.isfinite(lv[j + 1]) else rho[j]
    if lo >= hi:
        return float(lv[j])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = float(lo), float(hi)
    c_ = b_ - invphi * (b_ - a_)
    d_ = a_ + invphi * (b_ - a_)
    fc, fd = f(c_), f(d_)
    for _ in range(40):
        if fc < fd:
            b_, d_, fd = d_, c_, fc
            c_ = b_ - invphi * (b_ - a_)
            fc = f(c_)
        else:
            a_, c_, fc = c_, d_, fd
            d_ = a_ + invphi * (b_ - a_)
            fd = f(d_)
        if b_ - a_ <= 1e-10 * max(1.0, curve.vmax):
            break
    return min(fc, fd, float(lv[j]))


def lambda_min_of_L(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    L: float,
    domain: DomainSpec | None = None,
    a: FunctionSpec | None = None,
    curve: TimeMapCurve | None = None,
    tol: float = 1e-10,
) -> float:
    """Smallest lambda carrying a state with norm in [alpha, beta].

    Computed as the minimum of lambda(rho) over admissible peaks in
    [Psi(alpha), Psi(beta)], golden-polished around the grid minimizer.
    Raises NoAdmissibleRange when the area condition fails (the verdict
    is cross-checked against the area module).
    """
    curve = curve or _curve_for(f, g, p, L, domain, a, tol)
    idx = _window_indices(curve)
    if idx.size == 0:
        ctx = area_context(f, g, p, a, tol)
        ex = h_extrema_scaled(ctx, float(f.alpha), float(f.beta), L)
        raise NoAdmissibleRange(
            f"no admissible peak range at L={L}; area margin sign "
            f"{ex.h_min.sign} (mantissa {ex.h_min.mantissa:.3g})")
    j = int(idx[np.argmin(curve.lambda_values[idx])])
    return float(_polish_min(curve, j))


def lambda_bar_min_of_L(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    L: float,
    domain: DomainSpec | None = None,
    a: FunctionSpec | None = None,
    curve: TimeMapCurve | None = None,
    tol: float = 1e-10,
) -> float:
    """Smallest threshold above which EVERY larger lambda is attained.

    The attained set is assembled from the monotone pieces of the
    sampled curve (the top piece runs to infinity with the blow-up at
    the upper zero); the result is the lower end of the unbounded
    component after merging.
    """
    curve = curve or _curve_for(f, g, p, L, domain, a, tol)
    idx = _window_indices(curve)
    if idx.size == 0:
        raise NoAdmissibleRange(f"no admissible peak range at L={L}")
    lv = curve.lambda_values[idx]
    # split into maximal monotone pieces
    pieces: list[tuple[float, float]] = []
    start = 0
    sign = 0
    for i in range(1, len(lv)):
        s = np.sign(lv[i] - lv[i - 1])
        if sign == 0:
            sign = s
        elif s != 0 and s != sign:
            pieces.append((float(np.min(lv[start:i])), float(np.max(lv[start:i]))))
            start, sign = i - 1, s
    pieces.append((float(np.min(lv[start:])), math.inf))
    # merge overlapping ranges
    pieces.sort()
    merged = [list(pieces[0])]
    for lo, hi in pieces[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    top = merged[-1]
    if not math.isinf(top[1]):
        return float(top[1])  # defensive: treat the sup as the threshold
    # polish: the lower end of the unbounded component is a local minimum
    j_global = int(idx[np.argmin(np.abs(curve.lambda_values[idx] - top[0]))])
    polished = _polish_min(curve, j_global)
    return float(min(top[0], polished)) if polished <= top[0] else float(top[0])


def _curve_for(f, g, p, L, domain, a, tol, rho_resolution: int = 512) -> TimeMapCurve:
    table = build_psi(g, a, p, L, float(f.beta), tol)
    nl = Nonlinearity1D.from_transform(transformed_nonlinearity(f, table))
    return build_time_map(nl, p, rho_resolution, domain or DomainSpec("interval", 1.0))


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    """One row of a parameter sweep."""

    parameter: str
    value: float
    lambda_min: float | None = None
    lambda_bar_min: float | None = None
    maximal_norm: float | None = None
    branch_count: int = 0
    L_tilde_margin: float | None = None
    error: str = ""


def _margin_float(f, g, p, L, a, tol) -> float:
    ctx = area_context(f, g, p, a, tol)
    ex = h_extrema_scaled(ctx, float(f.alpha), float(f.beta), L)
    try:
        return ex.h_min.to_float()
    except OverflowError:
        return math.copysign(math.inf, ex.h_min.mantissa)


def sweep(
    f: FunctionSpec,
    g: FunctionSpec,
    p: float,
    L: float,
    lam: float,
    domain: DomainSpec | None = None,
    a: FunctionSpec | None = None,
    vary: str = "L",
    grid: Sequence[float] = (),
    tol: float = 1e-10,
    rho_resolution: int = 384,
    with_thresholds: bool = True,
) -> list[SweepRecord]:
    """Sweep L, p, or lambda; per-point failures land in the record.

    Each record carries the area margin, the attainment thresholds (when
    requested and computable), the maximal-branch norm at the operating
    lambda, and the branch count.
    """
    if vary not in ("L", "p", "lambda"):
        raise ValueError("vary must be one of 'L', 'p', 'lambda'")
    domain = domain or DomainSpec("interval", 1.0)
    records: list[SweepRecord] = []
    shared_curve: TimeMapCurve | None = None
    for value in grid:
        Lk, pk, lamk = L, p, lam
        if vary == "L":
            Lk = float(value)
        elif vary == "p":
            pk = float(value)
        else:
            lamk = float(value)
        try:
            margin = _margin_float(f, g, pk, Lk, a, tol)
            lam_min = lam_bar = norm = None
            branches = 0
            if margin > 0:
                if vary == "lambda" and shared_curve is not None:
                    curve = shared_curve
                else:
                    curve = _curve_for(f, g, pk, Lk, domain, a, tol, rho_resolution)
                    if vary == "lambda":
                        shared_curve = curve
                if with_thresholds:
                    lam_min = lambda_min_of_L(f, g, pk, Lk, domain, a, curve=curve)
                    lam_bar = lambda_bar_min_of_L(f, g, pk, Lk, domain, a, curve=curve)
                roots = _find_roots(curve, lamk)
                branches = len(roots)
                if roots:
                    nl = curve.nl
                    prof = _build_profile(nl, pk, lamk, roots[-1][0], domain,
                                          Lk, len(roots) - 1, roots[-1][1],
                                          n_profile=801, residual_rounds=1)
                    norm = prof.sup_norm
            records.append(SweepRecord(
                parameter=vary, value=float(value), lambda_min=lam_min,
                lambda_bar_min=lam_bar, maximal_norm=norm,
                branch_count=branches, L_tilde_margin=margin))
        except Exception as exc:  # keep sweeping; record the failure
            records.append(SweepRecord(parameter=vary, value=float(value),
                                       error=f"{type(exc).__name__}: {exc}"))
    return records
