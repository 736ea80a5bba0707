"""Everything built from the fractional-moment matrix of a model.

For a model with laws ``xi_ij`` the matrix ``m(s)`` has entries
``E[xi_ij^s]``.  Its Perron root ``rho(s)`` drives the whole analysis:

* ``cgf(s) = log rho(s) - log d`` is the per-level cumulant generating
  function of the log-label sum along a uniformly coloured root path,
* ``rate(z) = sup_{s >= 0} (s z - cgf(s))`` is the large-deviation rate of
  that sum, zero at and below the drift ``cgf'(0)``,
* ``min_perron_root()`` locates ``inf_{s >= 0} rho(s)``, whose position
  relative to 1 separates almost-surely-finite counts from infinite ones.

All spectral evaluations run in log space: moment matrices are scaled by
their largest log-entry before the power iteration, so curves remain
computable far past the point where ``exp`` would overflow.  Derivatives of
``rho`` use the exact left/right eigenvector formula, never differencing.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoConvergence, NonPositiveMatrix, ValidationError
from .laws import ModelSpec
from .optimize import bracket_min, golden_max, golden_min

__all__ = [
    "PerronTriple",
    "perron",
    "build_m",
    "SpectralCurve",
    "MinPerronRoot",
    "lambda_inf",
    "RateFunction",
    "level_moment",
    "level_log_moment",
]

# doubling search for scalar minima gives up at this exponent
S_SEARCH_MAX = 64.0


@dataclass(frozen=True)
class PerronTriple:
    """Dominant eigenvalue with positive right/left eigenvectors.

    ``right`` is normalised to unit sum; ``residual`` is the max-norm of
    ``m @ right - rho * right`` at that normalisation.
    """

    rho: float
    right: np.ndarray
    left: np.ndarray
    residual: float


def _power_iteration(
    a: np.ndarray,
    tol: float,
    max_iter: int,
    v0: np.ndarray | None = None,
) -> tuple[float, np.ndarray, float]:
    """Dominant eigenpair of a nonnegative matrix by shifted power iteration.

    Returns ``(rho, v, residual)`` with ``v`` normalised to unit sum and
    ``residual`` the max-norm of ``a v - rho v`` at that normalisation, so
    convergence is certified on ``a`` itself.  Iterating on ``a + rho I``
    (same Perron vector) breaks the near-bipartite stall where the
    subdominant eigenvalue sits close to ``-rho``, which moment matrices
    develop at extreme exponents.  The first pass runs on the unnormalised
    start vector, which keeps integer-valued cases (the all-ones matrix at
    s = 0) exact.
    """
    d = a.shape[0]
    v = np.ones(d) if v0 is None else np.array(v0, dtype=float)
    sv = float(v.sum())
    shift = 0.0
    for _ in range(max_iter):
        av = a @ v
        sav = float(av.sum())
        if sav <= 0.0 or not math.isfinite(sav):
            raise NoConvergence("power iteration lost positivity")
        rho = sav / sv
        residual = float(np.max(np.abs(av - rho * v))) / sv
        if residual <= tol:
            return rho, av / sav, residual
        w = av + shift * v
        v = w / float(w.sum())
        sv = 1.0
        shift = rho
    raise NoConvergence(
        f"power iteration: residual {residual} > {tol} after {max_iter} iterations"
    )


def perron(mat: np.ndarray, tol: float = 1e-12, max_iter: int = 200_000) -> PerronTriple:
    """Perron root and positive eigenvectors of a strictly positive matrix."""
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {a.shape}")
    if not np.all(a > 0.0) or not np.all(np.isfinite(a)):
        raise NonPositiveMatrix("all entries must be strictly positive and finite")
    if tol <= 0.0:
        raise ValidationError("tol must be positive")
    rho, right, residual = _power_iteration(a, tol, max_iter)
    _, left, _ = _power_iteration(a.T, tol, max_iter)
    return PerronTriple(rho=rho, right=right, left=left, residual=residual)


def build_m(model: ModelSpec, s: float) -> np.ndarray:
    """Moment matrix with entries ``E[xi_ij^s]``; strictly positive."""
    if not model.shared_domain().contains(s):
        raise DomainError(f"s={s} outside shared moment domain")
    return np.exp(log_moment_matrix(model, s))


def log_moment_matrix(model: ModelSpec, s: float) -> np.ndarray:
    out = np.empty((model.d, model.d))
    for i, j, law in model.entries():
        out[i, j] = law.log_moment(s)
    return out


def _logderiv_matrix(model: ModelSpec, s: float) -> np.ndarray:
    out = np.empty((model.d, model.d))
    for i, j, law in model.entries():
        out[i, j] = law.moment_logderiv(s)
    return out


@dataclass(frozen=True)
class MinPerronRoot:
    """``inf_{s >= 0} rho(s)`` with its argmin.

    ``at_boundary`` is set when the root is still decreasing at the search
    cap, i.e. the infimum appears to be a limit as s grows; the reported
    value is then the boundary evaluation (an upper bound on the infimum).
    """

    value: float
    s_argmin: float
    at_boundary: bool


class _Entry:
    __slots__ = ("scale", "a", "rho_a", "log_rho", "right", "residual", "left")

    def __init__(self, scale, a, rho_a, right, residual):
        self.scale = scale
        self.a = a
        self.rho_a = rho_a
        self.log_rho = scale + math.log(rho_a)
        self.right = right
        self.residual = residual
        self.left = None


class SpectralCurve:
    """Memoised spectral evaluations for one model.

    Safe for concurrent reads; cache writes are serialised by a lock.  Power
    iterations warm-start from the most recently computed eigenvector, which
    makes the scalar searches above this curve cheap.
    """

    def __init__(self, model: ModelSpec, perron_tol: float = 1e-12, xtol: float = 1e-10):
        self.model = model
        self.perron_tol = perron_tol
        self.xtol = xtol
        self._cache: dict[float, _Entry] = {}
        self._lock = threading.Lock()
        self._warm: np.ndarray | None = None
        self._min_root: MinPerronRoot | None = None

    # -- core evaluations -------------------------------------------------

    def _eval(self, s: float) -> _Entry:
        s = float(s)
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        if not self.model.shared_domain().contains(s):
            raise DomainError(f"s={s} outside shared moment domain")
        logm = log_moment_matrix(self.model, s)
        scale = float(np.max(logm))
        # clamp so extreme spreads stay strictly positive after exp
        a = np.exp(np.maximum(logm - scale, -690.0))
        # the fresh all-ones start keeps rho(0) = d exact; warm-start elsewhere
        v0 = self._warm if s != 0.0 else None
        rho_a, right, residual = _power_iteration(a, self.perron_tol, 200_000, v0=v0)
        entry = _Entry(scale, a, rho_a, right, residual)
        with self._lock:
            self._cache[s] = entry
            self._warm = right
        return entry

    def log_rho(self, s: float) -> float:
        """log of the Perron root of the moment matrix at s."""
        return self._eval(s).log_rho

    def rho(self, s: float) -> float:
        """Perron root; may overflow to inf far out where log_rho is still fine."""
        e = self._eval(s)
        return math.exp(e.scale) * e.rho_a

    def perron_at(self, s: float) -> PerronTriple:
        e = self._eval(s)
        if e.left is None:
            _, left, _ = _power_iteration(e.a.T, self.perron_tol, 200_000)
            with self._lock:
                e.left = left
        return PerronTriple(
            rho=e.rho_a,
            right=e.right,
            left=e.left,
            residual=e.residual,
        )

    def log_rho_prime(self, s: float) -> float:
        """(log rho)'(s) from the eigenvector sandwich; exact, no differencing."""
        if not self.model.shared_domain().contains_interior(s):
            raise DomainError(f"s={s} not interior to shared moment domain")
        e = self._eval(s)
        if e.left is None:
            self.perron_at(s)
        g = _logderiv_matrix(self.model, s)
        w, v = e.left, e.right
        return float(w @ (e.a * g) @ v) / (e.rho_a * float(w @ v))

    def rho_prime(self, s: float) -> float:
        return self.rho(s) * self.log_rho_prime(s)

    def cgf(self, s: float) -> float:
        """Per-level cumulant generating function: log rho(s) - log d; 0 at s=0."""
        if s == 0.0:
            return 0.0
        return self.log_rho(s) - math.log(self.model.d)

    def cgf_prime(self, s: float) -> float:
        return self.log_rho_prime(s)

    # -- derived scalars ----------------------------------------------------

    def min_perron_root(self) -> MinPerronRoot:
        """Golden-section minimum of log rho over s >= 0, bracket by doubling."""
        if self._min_root is not None:
            return self._min_root
        lo, hi, at_boundary = bracket_min(self.log_rho, 0.0, 1.0, S_SEARCH_MAX)
        if at_boundary:
            result = MinPerronRoot(math.exp(self.log_rho(hi)), hi, True)
        else:
            s_star, log_min = golden_min(self.log_rho, lo, hi, self.xtol)
            result = MinPerronRoot(math.exp(log_min), s_star, False)
        with self._lock:
            self._min_root = result
        return result


def lambda_inf(curve: SpectralCurve) -> MinPerronRoot:
    """Functional spelling of :meth:`SpectralCurve.min_perron_root`."""
    return curve.min_perron_root()


class RateFunction:
    """Large-deviation rate of the per-level log-label sum.

    ``rate(z)`` returns ``(value, s0)``: the rate and the exponent achieving
    the supremum.  Below the drift the rate is identically zero with
    ``s0 = 0``; past the largest attainable slope it is ``inf`` (returned as
    a flag value, never raised).
    """

    def __init__(self, curve: SpectralCurve):
        self.curve = curve
        self.model = curve.model

    @property
    def drift(self) -> float:
        """cgf'(0), the law-of-large-numbers slope of the log-label sum."""
        return self.curve.log_rho_prime(0.0)

    @property
    def mu(self) -> float:
        """Negated drift; the variational interval for the growth exponent is [0, mu]."""
        return -self.drift

    def slope_range(self) -> tuple[float, float]:
        """Attainable cgf slopes over the search range [0, S_SEARCH_MAX]."""
        return (self.drift, self.curve.log_rho_prime(S_SEARCH_MAX))

    def rate(self, z: float) -> tuple[float, float]:
        if z <= self.drift:
            return 0.0, 0.0
        g = lambda s: s * z - self.curve.cgf(s)
        lo, hi, at_boundary = bracket_min(lambda s: -g(s), 0.0, 1.0, S_SEARCH_MAX)
        if at_boundary:
            # slope never reaches z inside the search range: rate diverges
            return math.inf, math.inf
        s0, value = golden_max(g, lo, hi, self.curve.xtol)
        return max(value, 0.0), s0


def level_log_moment(model: ModelSpec, s: float, n: int, root_colour: int = 1) -> float:
    """log E[exp(s * S_n)] for the log-label sum along a root path.

    The root has the given colour; each subsequent colour on the path is
    independent uniform, so the expectation is the root-row entry of the
    n-th power of the moment matrix divided by d^n.  Computed with per-step
    renormalisation so deep levels cannot overflow.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not 1 <= root_colour <= model.d:
        raise ValidationError(f"root colour must be in 1..{model.d}")
    if not model.shared_domain().contains(s):
        raise DomainError(f"s={s} outside shared moment domain")
    logm = log_moment_matrix(model, s)
    scale = float(np.max(logm))
    a = np.exp(logm - scale)
    v = np.ones(model.d)
    log_acc = 0.0
    for _ in range(n):
        v = a @ v
        top = float(np.max(v))
        v /= top
        log_acc += math.log(top)
    return n * scale + log_acc + math.log(float(v[root_colour - 1])) - n * math.log(model.d)


def level_moment(model: ModelSpec, s: float, n: int, root_colour: int = 1) -> float:
    """E[exp(s * S_n)]; see :func:`level_log_moment`."""
    return math.exp(level_log_moment(model, s, n, root_colour))
