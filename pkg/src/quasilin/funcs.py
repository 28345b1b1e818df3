"""Validated scalar functions f, g, a and their antiderivatives.

A :class:`FunctionSpec` wraps an expression tree with the metadata the
rest of the library relies on: for the nonlinearity f, two consecutive
zeros ``0 < alpha < beta`` with f positive between them; for the weight
g, an optional nonnegativity promise; for the diffusion coefficient a,
strict positivity.  ``validate_spec`` checks those promises on a grid
and reports every violation instead of raising.

Evaluation outside the declared domain is clamped to it by default
(only states in [0, beta] are ever meaningful downstream); a linear
taper to zero just outside the domain is available as an option.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .expr import ExprAst, evaluate, parse_expression, to_text
from .quadrature import Antiderivative

__all__ = [
    "FunctionKind", "FunctionSpec", "CheckResult", "ValidationReport",
    "validate_spec", "antiderivative", "PRESETS", "preset", "schrodinger_pair",
]

FunctionKind = Literal["nonlinearity-f", "weight-g", "diffusion-a"]


@dataclass(frozen=True)
class FunctionSpec:
    """A scalar function with its role and validity interval."""

    ast: ExprAst
    kind: FunctionKind
    domain: tuple[float, float]
    alpha: float | None = None       # zeros of f, required for kind f
    beta: float | None = None
    positive: bool = False           # promise g >= 0 / a > 0 on the domain
    name: str = ""

    def __post_init__(self):
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid domain {self.domain!r}")
        if self.kind == "nonlinearity-f":
            if self.alpha is None or self.beta is None:
                raise ValueError("kind 'nonlinearity-f' requires alpha and beta")
            if not (0 < self.alpha < self.beta):
                raise ValueError(
                    f"need 0 < alpha < beta, got alpha={self.alpha}, beta={self.beta}")
            if self.alpha < lo or self.beta > hi:
                raise ValueError("zeros alpha, beta must lie inside the domain")

    @classmethod
    def from_text(cls, text: str, kind: FunctionKind, **kw) -> "FunctionSpec":
        return cls(ast=parse_expression(text), kind=kind, **kw)

    @property
    def text(self) -> str:
        return to_text(self.ast)

    def __call__(self, s, *, mode: str = "clamp"):
        """Evaluate at ``s``; arguments outside the domain are clamped.

        ``mode='taper'`` instead continues linearly to zero over a unit
        band outside the domain, matching the truncation device used for
        solution bounds; ``mode='raw'`` evaluates the expression as-is.
        """
        lo, hi = self.domain
        arr = np.asarray(s, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if mode == "raw":
            out = evaluate(self.ast, arr)
        elif mode == "clamp":
            out = evaluate(self.ast, np.clip(arr, lo, hi))
        elif mode == "taper":
            out = evaluate(self.ast, np.clip(arr, lo, hi))
            below = np.clip(1.0 - (lo - arr), 0.0, 1.0)
            above = np.clip(1.0 - (arr - hi), 0.0, 1.0)
            out = out * below * above
        else:
            raise ValueError(f"unknown evaluation mode {mode!r}")
        return float(out[0]) if scalar else out

    def changes_sign(self, grid_size: int = 512, tol_zero: float = 1e-9) -> bool:
        """True if the function dips below -tol_zero anywhere on the domain."""
        s = np.linspace(self.domain[0], self.domain[1], grid_size)
        return bool(np.min(self(s)) < -tol_zero)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_point: float | None = None
    worst_value: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    spec_name: str
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps({
            "spec": self.spec_name,
            "ok": self.ok,
            "checks": [
                {"name": c.name, "passed": c.passed,
                 "worst_point": c.worst_point, "worst_value": c.worst_value,
                 "detail": c.detail}
                for c in self.checks
            ],
        }, indent=2)


def _worst(points: np.ndarray, values: np.ndarray, smallest: bool) -> tuple[float, float]:
    i = int(np.argmin(values)) if smallest else int(np.argmax(values))
    return float(points[i]), float(values[i])


def validate_spec(
    spec: FunctionSpec,
    grid_size: int = 512,
    tol_zero: float = 1e-9,
    check_f0_nonneg: bool = True,
) -> ValidationReport:
    """Check the spec's declared invariants on an evaluation grid.

    Failures are report entries, never exceptions; each entry carries
    the worst offending sample point.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")
    lo, hi = spec.domain
    checks: list[CheckResult] = []

    if spec.kind == "nonlinearity-f":
        a, b = spec.alpha, spec.beta
        fa, fb = spec(a), spec(b)
        checks.append(CheckResult(
            "f(alpha) = 0", abs(fa) <= tol_zero, a, fa,
            f"|f(alpha)| = {abs(fa):.3g} vs tol {tol_zero:g}"))
        checks.append(CheckResult(
            "f(beta) = 0", abs(fb) <= tol_zero, b, fb,
            f"|f(beta)| = {abs(fb):.3g} vs tol {tol_zero:g}"))
        delta = (b - a) / grid_size
        interior = np.linspace(a + delta, b - delta, grid_size)
        fv = spec(interior)
        pt, val = _worst(interior, fv, smallest=True)
        checks.append(CheckResult(
            "f > 0 on (alpha, beta)", val > 0.0, pt, val))
        if check_f0_nonneg:
            f0 = spec(max(0.0, lo))
            checks.append(CheckResult(
                "f(0) >= 0", f0 >= -tol_zero, max(0.0, lo), f0))
    elif spec.kind == "weight-g":
        if spec.positive:
            s = np.linspace(lo, hi, grid_size)
            gv = spec(s)
            pt, val = _worst(s, gv, smallest=True)
            checks.append(CheckResult("g >= 0 on domain", val >= -tol_zero, pt, val))
        else:
            checks.append(CheckResult("g finite on domain", True,
                                      detail="no sign promise declared"))
    elif spec.kind == "diffusion-a":
        s = np.linspace(lo, hi, grid_size)
        av = spec(s)
        pt, val = _worst(s, av, smallest=True)
        checks.append(CheckResult("a > 0 on domain", val > 0.0, pt, val))
    return ValidationReport(spec.name or spec.text, tuple(checks))


def antiderivative(fspec, tol: float = 1e-12, base: float = 0.0) -> Antiderivative:
    """Cached antiderivative of a spec (or any vectorized callable).

    The result G satisfies G(base) = 0 exactly and |G(s) - int| <= tol.
    """
    return Antiderivative(fspec, tol=tol, base=base)


# ---------------------------------------------------------------------------
# built-in presets
# ---------------------------------------------------------------------------

def _f_sign() -> FunctionSpec:
    # s(s-1)(2-s): zeros at 1 and 2, negative on (0, 1), f(0) = 0
    return FunctionSpec.from_text(
        "s*(s-1)*(2-s)", "nonlinearity-f",
        domain=(0.0, 2.0), alpha=1.0, beta=2.0, name="f_sign")


def _f_pos() -> FunctionSpec:
    # nonnegative bump supported on [1, 2]
    return FunctionSpec.from_text(
        "max(0, (s-1)*(2-s))", "nonlinearity-f",
        domain=(0.0, 2.0), alpha=1.0, beta=2.0, name="f_pos")


def _g_one() -> FunctionSpec:
    return FunctionSpec.from_text(
        "1", "weight-g", domain=(-1.0, 3.0), positive=True, name="g_one")


def _g_lin() -> FunctionSpec:
    return FunctionSpec.from_text(
        "s + 1", "weight-g", domain=(0.0, 3.0), positive=True, name="g_lin")


PRESETS = {
    "f_sign": _f_sign,
    "f_pos": _f_pos,
    "g_one": _g_one,
    "g_lin": _g_lin,
}


def preset(name: str) -> FunctionSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def schrodinger_pair(kappa: float = 2.0, p: float = 2.0,
                     domain: tuple[float, float] = (0.0, 2.0),
                     ) -> tuple[FunctionSpec, FunctionSpec]:
    """Diffusion coefficient a(s) = 1 + (kappa^p/2)|s|^{p(kappa-1)} and its
    companion weight g = a'/p, for which the weighted area condition
    collapses to the classical one."""
    if kappa < 1 + 1.0 / p:
        raise ValueError("require kappa >= 1 + 1/p")
    c = kappa ** p / 2.0
    e = p * (kappa - 1.0)
    a_text = f"1 + {c!r}*abs(s)^{e!r}"
    # a'(s) = c*e*|s|^(e-1)*sign(s); for s >= 0 this is c*e*s^(e-1)
    g_text = f"({c!r}*{e!r}/{p!r})*abs(s)^{e - 1.0!r}*piecewise(s >= 0, 1, -1)"
    a_spec = FunctionSpec.from_text(a_text, "diffusion-a", domain=domain,
                                    positive=True, name=f"a_schrod(kappa={kappa},p={p})")
    g_spec = FunctionSpec.from_text(g_text, "weight-g", domain=domain,
                                    positive=True, name=f"g_schrod(kappa={kappa},p={p})")
    return a_spec, g_spec
