"""Headline outputs: regime, growth exponent by two routes, BRW speed.

For an admissible model the expected number of vertices with value at least
``exp(-t)`` grows like ``exp(M t)``.  Two independent routes to ``M`` ship:

* variational: ``M = max over u in (0, mu] of (log d - rate(-u)) / u``,
* spectral: the smaller root of ``rho(s) = 1``.

Their agreement (within 1e-6) is the package's central cross-check.  The
same spectral curve also yields the minimal-displacement speed of the
multi-type branching random walk with jumps ``eta = -log xi``, as the root
in x of ``inf_{s >= 0} e^{s x} rho(s) = 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import AssumptionViolation, BracketingFailure, UnsupportedLaw
from .laws import (
    Atomic,
    AtomicReal,
    Deterministic,
    DeterministicReal,
    LogNormal,
    LogUniform,
    ModelSpec,
    Normal,
    RealLaw,
    UniformReal,
    check_conditions,
)
from .optimize import bisect_root, bracket_min, golden_max, golden_min
from .spectral import S_SEARCH_MAX, RateFunction, SpectralCurve

__all__ = [
    "Regime",
    "EPS_CRITICAL",
    "CROSS_CHECK_TOL",
    "classify",
    "growth_exponent_variational",
    "growth_exponent_spectral",
    "BrwSpeed",
    "brw_speed",
    "fpp_transform",
    "ExponentReport",
    "build_report",
]

EPS_CRITICAL = 1e-9  # half-width of the refused band around rho-infimum 1
CROSS_CHECK_TOL = 1e-6


class Regime(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    CRITICAL = "critical"


def _as_curve(model: ModelSpec | SpectralCurve) -> SpectralCurve:
    if isinstance(model, SpectralCurve):
        return model
    return SpectralCurve(model)


def classify(model: ModelSpec | SpectralCurve) -> Regime:
    """Finite / infinite / critical according to ``inf rho`` versus 1.

    Within ``EPS_CRITICAL`` of 1 the model is declared critical and every
    exponent computation refuses to run: no result covers that boundary.
    """
    curve = _as_curve(model)
    lam = curve.min_perron_root().value
    if lam < 1.0 - EPS_CRITICAL:
        return Regime.FINITE
    if lam > 1.0 + EPS_CRITICAL:
        return Regime.INFINITE
    return Regime.CRITICAL


def _require_finite(curve: SpectralCurve) -> None:
    regime = classify(curve)
    if regime is not Regime.FINITE:
        lam = curve.min_perron_root().value
        raise AssumptionViolation(
            f"A1 fails: inf rho = {lam:.6g} gives regime {regime.value}"
        )


def growth_exponent_variational(model: ModelSpec | SpectralCurve) -> tuple[float, float]:
    """Growth exponent by maximising f(u) = (log d - rate(-u)) / u on (0, mu].

    Returns ``(M, u_star)``.  f tends to -inf at 0+ and has negative slope at
    mu, so the maximiser is interior; golden section is run on the whole
    interval with a tiny left guard.
    """
    curve = _as_curve(model)
    _require_finite(curve)
    rf = RateFunction(curve)
    mu = rf.mu
    if mu <= 0.0:
        raise AssumptionViolation(f"A2 fails: mu = {mu:.6g} <= 0")
    log_d = math.log(curve.model.d)

    def f(u: float) -> float:
        value, _ = rf.rate(-u)
        return (log_d - value) / u

    u_star, m = golden_max(f, mu * 1e-9, mu, curve.xtol)
    # the right endpoint always evaluates to log d / mu (the rate vanishes
    # there); for degenerate models the interior is -inf and the maximum
    # sits exactly at mu, which golden section cannot probe
    f_mu = log_d / mu
    if f_mu > m:
        return f_mu, mu
    return m, u_star


def growth_exponent_spectral(model: ModelSpec | SpectralCurve) -> float:
    """Smaller root of ``rho(s) = 1``, bisected on [0, argmin of rho].

    The argmin lies at or beyond the smaller root by convexity, so the
    bisection bracket always holds the minimal root.
    """
    curve = _as_curve(model)
    _require_finite(curve)
    root = curve.min_perron_root()
    return bisect_root(
        curve.log_rho,
        0.0,
        root.s_argmin,
        curve.xtol,
        f_lo=curve.log_rho(0.0),
        f_hi=math.log(root.value),
    )


@dataclass(frozen=True)
class BrwSpeed:
    """Minimal-displacement speed with the residual of its defining equation."""

    x0: float
    residual: float
    warnings: tuple[str, ...] = ()


def brw_speed(
    model: ModelSpec | SpectralCurve,
    outer_xtol: float = 1e-10,
    residual_tol: float = 1e-9,
) -> BrwSpeed:
    """Root in x of ``g(x) = inf_{s >= 0} (s x + log rho(s))``.

    ``g`` is nondecreasing in x; the outer bisection brackets its sign
    change by doubling, the inner infimum runs golden section ten times
    tighter.  For degenerate (point-mass) models ``g`` can jump through
    zero; the bisection point is still returned, with a warning instead of
    a residual guarantee.
    """
    curve = _as_curve(model)
    inner_xtol = outer_xtol / 10.0
    hit_cap = False

    def g(x: float) -> float:
        nonlocal hit_cap
        obj = lambda s: s * x + curve.log_rho(s)
        lo, hi, at_boundary = bracket_min(obj, 0.0, 1.0, S_SEARCH_MAX)
        if at_boundary:
            hit_cap = True
            return obj(hi)
        _, val = golden_min(obj, lo, hi, inner_xtol)
        return val

    # bracket the sign change of g by doubling outward from 0
    x_lo, x_hi = 0.0, 0.0
    g0 = g(0.0)
    if g0 < 0.0:
        x_lo = 0.0
        step = 1.0
        while g(x_lo + step) < 0.0:
            step *= 2.0
            if step > 1024.0:
                raise BracketingFailure("speed equation has no sign change above 0")
        x_hi = x_lo + step
        x_lo = x_lo + step / 2.0 if step > 1.0 else x_lo
    elif g0 > 0.0:
        step = 1.0
        while g(-step) > 0.0:
            step *= 2.0
            if step > 1024.0:
                raise BracketingFailure("speed equation has no sign change below 0")
        x_lo, x_hi = -step, -step / 2.0 if step > 1.0 else 0.0
    else:
        return BrwSpeed(0.0, 0.0)

    x0 = bisect_root(g, x_lo, x_hi, outer_xtol)
    hit_cap = False
    residual = abs(g(x0))
    warnings = []
    if hit_cap:
        warnings.append(
            "speed-equation-cap: the infimum over s sits at the search cap, "
            "the root is a cap-limited approximation"
        )
    if residual > residual_tol:
        warnings.append(
            "speed-equation-jump: residual above tolerance, the infimum jumps "
            "through 1 at the root (degenerate jumps)"
        )
    return BrwSpeed(x0, residual, tuple(warnings))


def fpp_transform(passage_time_laws) -> ModelSpec:
    """Push passage-time laws through ``x -> exp(-x)`` into a label model.

    Accepts a d x d matrix of real-valued laws (``Normal``, ``AtomicReal``,
    ``UniformReal``, ``DeterministicReal``).  Counting vertices reachable by
    time t then reduces exactly to counting vertices of value at least
    ``exp(-t)`` in the transformed model.
    """
    rows = []
    for row in passage_time_laws:
        out = []
        for law in row:
            if isinstance(law, Normal):
                out.append(LogNormal(-law.mean, law.sd))
            elif isinstance(law, AtomicReal):
                out.append(
                    Atomic(tuple(math.exp(-x) for x in law.atoms), law.probs)
                )
            elif isinstance(law, UniformReal):
                out.append(LogUniform(-law.b, -law.a))
            elif isinstance(law, DeterministicReal):
                out.append(Deterministic(math.exp(-law.value)))
            else:
                raise UnsupportedLaw(f"no exp(-x) push-forward for {law!r}")
        rows.append(tuple(out))
    d = len(rows)
    return ModelSpec(d, tuple(rows))


@dataclass(frozen=True)
class ExponentReport:
    """Everything the analysis pipeline knows about one model."""

    regime: Regime
    lambda_: float
    s_argmin: float
    mu: float
    M_variational: float | None = None
    u_star: float | None = None
    s1_spectral: float | None = None
    cross_residual: float | None = None
    x0_brw: float | None = None
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "lambda": self.lambda_,
            "s_argmin": self.s_argmin,
            "mu": self.mu,
            "M_variational": self.M_variational,
            "u_star": self.u_star,
            "s1_spectral": self.s1_spectral,
            "cross_residual": self.cross_residual,
            "x0_brw": self.x0_brw,
            "warnings": list(self.warnings),
        }


def build_report(
    model: ModelSpec | SpectralCurve, include_brw: bool = True
) -> ExponentReport:
    """Run the full exponent pipeline, collecting warnings instead of raising.

    The growth exponents are only defined in the finite regime with positive
    mu; outside it the corresponding fields stay None and a warning records
    which assumption failed.
    """
    curve = _as_curve(model)
    admissibility = check_conditions(curve.model)
    warnings: list[str] = list(admissibility.warnings)
    if admissibility.degenerate:
        warnings.append("nonstrict-convexity: degenerate model, exponents unreliable")

    root = curve.min_perron_root()
    if root.at_boundary:
        warnings.append(
            f"rho still decreasing at s = {root.s_argmin:g}; "
            "reported infimum is an upper bound"
        )
    regime = classify(curve)
    rf = RateFunction(curve)
    mu = rf.mu

    m_var = u_star = s1 = cross = x0 = None
    if regime is Regime.FINITE and mu > 0.0:
        m_var, u_star = growth_exponent_variational(curve)
        s1 = growth_exponent_spectral(curve)
        cross = abs(m_var - s1)
        if cross > CROSS_CHECK_TOL:
            warnings.append(f"cross-check residual {cross:.3e} exceeds {CROSS_CHECK_TOL}")
        if not 0.0 < u_star < mu:
            warnings.append(f"u_star {u_star:.6g} not strictly inside (0, mu)")
        if include_brw:
            speed = brw_speed(curve)
            x0 = speed.x0
            warnings.extend(speed.warnings)
    else:
        if regime is not Regime.FINITE:
            warnings.append(f"A1 fails: regime {regime.value}, growth exponent undefined")
        if mu <= 0.0:
            warnings.append(f"A2 fails: mu = {mu:.6g} <= 0")

    return ExponentReport(
        regime=regime,
        lambda_=root.value,
        s_argmin=root.s_argmin,
        mu=mu,
        M_variational=m_var,
        u_star=u_star,
        s1_spectral=s1,
        cross_residual=cross,
        x0_brw=x0,
        warnings=tuple(warnings),
    )
