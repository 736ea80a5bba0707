"""Positive label laws and their fractional-moment algebra.

A model on the coloured d-ary tree is a d x d matrix of strictly positive
random labels: entry ``(i, j)`` is the law of the label on an edge whose
parent has colour ``i`` and whose child has colour ``j``.  Everything the
analysis modules need from a law is closed-form here:

* ``moment(s)``            -> E[xi^s]
* ``moment_logweighted(s)``-> E[xi^s log xi]  (the s-derivative of the above)
* ``log_moment(s)``        -> log E[xi^s], stable for large ``|s|``
* ``moment_logderiv(s)``   -> d/ds log E[xi^s]
* ``sample`` / ``sample_array`` and the exponentially tilted variants
* ``domain()``             -> interval of finite fractional moments

Four families ship: ``Atomic``, ``LogNormal``, ``LogUniform`` and
``Deterministic``.  All four have moments finite on the whole line, which
keeps every admissibility condition checkable in closed form.  New families
must supply the full protocol above (see :class:`LabelLaw`); heavy-tailed
families with a bounded moment domain are intentionally out of scope.

``Deterministic`` is admitted for analytic test vectors only and is flagged
degenerate: a point mass has no randomness for the tail machinery to see.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "LabelLaw",
    "Atomic",
    "LogNormal",
    "LogUniform",
    "Deterministic",
    "MomentDomain",
    "ModelSpec",
    "EntryCheck",
    "AdmissibilityReport",
    "check_conditions",
    "RealLaw",
    "Normal",
    "AtomicReal",
    "UniformReal",
    "DeterministicReal",
    "moment",
    "moment_logweighted",
    "sample",
    "domain",
]

_PROB_SLACK = 1e-9  # constructor tolerance for probabilities off unity


@dataclass(frozen=True)
class MomentDomain:
    """Interval of exponents s with E[xi^s] finite."""

    lower: float
    upper: float

    def contains(self, s: float) -> bool:
        return self.lower <= s <= self.upper

    def contains_interior(self, s: float) -> bool:
        return self.lower < s < self.upper

    def covers_unit_interval(self) -> bool:
        return self.lower <= 0.0 and self.upper >= 1.0

    def zero_in_interior(self) -> bool:
        return self.lower < 0.0 < self.upper


_FULL_LINE = MomentDomain(-math.inf, math.inf)


class LabelLaw(abc.ABC):
    """Protocol for a strictly positive label law.

    Extension point: a new family must implement every abstract method and
    keep ``moment``/``moment_logweighted`` consistent (the latter is the
    exact s-derivative of the former).  ``moment(0)`` must equal 1 exactly.
    """

    @abc.abstractmethod
    def log_moment(self, s: float) -> float:
        """log E[xi^s], evaluated stably."""

    @abc.abstractmethod
    def moment_logderiv(self, s: float) -> float:
        """d/ds log E[xi^s] = E[xi^s log xi] / E[xi^s]."""

    @abc.abstractmethod
    def domain(self) -> MomentDomain:
        """Interval of exponents with a finite fractional moment."""

    @abc.abstractmethod
    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vector of independent draws."""

    @abc.abstractmethod
    def tilted_sample_array(
        self, s: float, rng: np.random.Generator, size: int
    ) -> np.ndarray:
        """Draws from the exponentially tilted law with density prop. to x^s."""

    @abc.abstractmethod
    def support_upper(self) -> float:
        """Almost-sure upper bound of the law (``inf`` if unbounded)."""

    @property
    def is_degenerate(self) -> bool:
        return False

    def _check_in_domain(self, s: float) -> None:
        if not self.domain().contains(s):
            raise DomainError(f"s={s} outside moment domain {self.domain()}")

    def moment(self, s: float) -> float:
        """E[xi^s]; exact 1.0 at s=0 for every family."""
        self._check_in_domain(s)
        if s == 0.0:
            return 1.0
        return math.exp(self.log_moment(s))

    def moment_logweighted(self, s: float) -> float:
        """E[xi^s log xi]."""
        if not self.domain().contains_interior(s):
            raise DomainError(f"s={s} not interior to {self.domain()}")
        return self.moment(s) * self.moment_logderiv(s)

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_array(rng, 1)[0])

    def log_atoms(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(log-atoms, probabilities) for purely atomic laws, else None."""
        return None


@dataclass(frozen=True)
class Atomic(LabelLaw):
    """Finitely supported positive law: atoms ``x_k`` with weights ``p_k``."""

    atoms: tuple[float, ...]
    probs: tuple[float, ...]
    _log_atoms: np.ndarray = field(init=False, repr=False, compare=False)
    _probs_arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(float(x) for x in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        if len(atoms) == 0 or len(atoms) != len(probs):
            raise ValidationError("atoms and probs must be nonempty and equal length")
        if any(not math.isfinite(x) or x <= 0.0 for x in atoms):
            raise ValidationError("atoms must be strictly positive and finite")
        if any(p < 0.0 or not math.isfinite(p) for p in probs):
            raise ValidationError("probabilities must be nonnegative and finite")
        total = math.fsum(probs)
        if abs(total - 1.0) > _PROB_SLACK:
            raise ValidationError(f"probabilities sum to {total}, not 1")
        # drop zero-probability atoms so log-weights stay finite
        kept = [(x, p / total) for x, p in zip(atoms, probs) if p > 0.0]
        atoms = tuple(x for x, _ in kept)
        probs = tuple(p for _, p in kept)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_log_atoms", np.log(np.asarray(atoms)))
        object.__setattr__(self, "_probs_arr", np.asarray(probs))

    def log_moment(self, s: float) -> float:
        if s == 0.0:
            return 0.0
        z = s * self._log_atoms + np.log(self._probs_arr)
        m = float(np.max(z))
        return m + math.log(float(np.sum(np.exp(z - m))))

    def moment_logderiv(self, s: float) -> float:
        z = s * self._log_atoms + np.log(self._probs_arr)
        w = np.exp(z - np.max(z))
        w /= w.sum()
        return float(np.dot(w, self._log_atoms))

    def domain(self) -> MomentDomain:
        return _FULL_LINE

    def sample_array(self, rng, size):
        idx = rng.choice(len(self.atoms), size=size, p=self._probs_arr)
        return np.asarray(self.atoms)[idx]

    def tilted_sample_array(self, s, rng, size):
        z = s * self._log_atoms + np.log(self._probs_arr)
        w = np.exp(z - np.max(z))
        w /= w.sum()
        idx = rng.choice(len(self.atoms), size=size, p=w)
        return np.asarray(self.atoms)[idx]

    def support_upper(self) -> float:
        return max(self.atoms)

    def log_atoms(self):
        return self._log_atoms.copy(), self._probs_arr.copy()


@dataclass(frozen=True)
class LogNormal(LabelLaw):
    """xi = exp(Y) with Y ~ Normal(m0, sigma^2); E[xi^s] = exp(m0 s + sigma^2 s^2 / 2)."""

    m0: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.m0):
            raise ValidationError("m0 must be finite")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValidationError("sigma must be strictly positive")

    def log_moment(self, s: float) -> float:
        return self.m0 * s + 0.5 * self.sigma**2 * s * s

    def moment_logderiv(self, s: float) -> float:
        return self.m0 + self.sigma**2 * s

    def domain(self) -> MomentDomain:
        return _FULL_LINE

    def sample_array(self, rng, size):
        return np.exp(rng.normal(self.m0, self.sigma, size=size))

    def tilted_sample_array(self, s, rng, size):
        # tilting a Gaussian log shifts its mean by s * sigma^2
        return np.exp(rng.normal(self.m0 + s * self.sigma**2, self.sigma, size=size))

    def support_upper(self) -> float:
        return math.inf


def _log_expm1_over(w: float) -> float:
    """log(expm1(w) / w), the log-MGF of Uniform(0, 1) at w; 0 at w = 0."""
    if w == 0.0:
        return 0.0
    if w > 700.0:
        return w - math.log(w)
    if w < -700.0:
        return -math.log(-w)
    return math.log(math.expm1(w) / w)


def _mean_tilted_unit(w: float) -> float:
    """E[V e^{wV}] / E[e^{wV}] for V ~ Uniform(0, 1)."""
    if abs(w) < 1e-5:
        return 0.5 + w / 12.0 - w**3 / 720.0
    return 1.0 / (-math.expm1(-w)) - 1.0 / w


@dataclass(frozen=True)
class LogUniform(LabelLaw):
    """log xi ~ Uniform(a, b); moment has a removable singularity at s = 0."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValidationError("log-endpoints must be finite")
        if not self.a < self.b:
            raise ValidationError("require a < b")

    def log_moment(self, s: float) -> float:
        if s == 0.0:
            return 0.0
        return self.a * s + _log_expm1_over((self.b - self.a) * s)

    def moment_logderiv(self, s: float) -> float:
        w = (self.b - self.a) * s
        return self.a + (self.b - self.a) * _mean_tilted_unit(w)

    def domain(self) -> MomentDomain:
        return _FULL_LINE

    def sample_array(self, rng, size):
        return np.exp(rng.uniform(self.a, self.b, size=size))

    def tilted_sample_array(self, s, rng, size):
        if s == 0.0:
            return self.sample_array(rng, size)
        # inverse CDF of the truncated exponential on [a, b]
        u = rng.random(size)
        w = s * (self.b - self.a)
        y = self.a + np.log1p(u * np.expm1(w)) / s
        return np.exp(y)

    def support_upper(self) -> float:
        return math.exp(self.b)


@dataclass(frozen=True)
class Deterministic(LabelLaw):
    """Point mass at ``value``; degenerate, admitted for analytic tests only."""

    value: float

    def __post_init__(self):
        if not (self.value > 0.0 and math.isfinite(self.value)):
            raise ValidationError("value must be strictly positive and finite")

    def log_moment(self, s: float) -> float:
        return s * math.log(self.value)

    def moment_logderiv(self, s: float) -> float:
        return math.log(self.value)

    def domain(self) -> MomentDomain:
        return _FULL_LINE

    def sample_array(self, rng, size):
        return np.full(size, self.value)

    def tilted_sample_array(self, s, rng, size):
        return np.full(size, self.value)

    def support_upper(self) -> float:
        return self.value

    @property
    def is_degenerate(self) -> bool:
        return True

    def log_atoms(self):
        return np.array([math.log(self.value)]), np.array([1.0])


# -- module-level op aliases (functional spelling of the law protocol) --------


def moment(law: LabelLaw, s: float) -> float:
    return law.moment(s)


def moment_logweighted(law: LabelLaw, s: float) -> float:
    return law.moment_logweighted(s)


def sample(law: LabelLaw, rng: np.random.Generator) -> float:
    return law.sample(rng)


def domain(law: LabelLaw) -> MomentDomain:
    return law.domain()


# -- model spec ----------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Dimension d plus the d x d matrix of label laws.

    ``laws[i][j]`` is the law on an edge from a parent of colour ``i + 1``
    to a child of colour ``j + 1`` (public colour indices are 1-based).
    """

    d: int
    laws: tuple[tuple[LabelLaw, ...], ...]

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 2):
            raise ValidationError("d must be an integer >= 2")
        laws = tuple(tuple(row) for row in self.laws)
        if len(laws) != self.d or any(len(row) != self.d for row in laws):
            raise ValidationError(f"law matrix must be exactly {self.d}x{self.d}")
        for row in laws:
            for law in row:
                if not isinstance(law, LabelLaw):
                    raise ValidationError(f"not a label law: {law!r}")
        object.__setattr__(self, "laws", laws)

    @classmethod
    def iid(cls, d: int, law: LabelLaw) -> "ModelSpec":
        """Model with the same law on every (parent, child) colour pair."""
        return cls(d, tuple(tuple(law for _ in range(d)) for _ in range(d)))

    def law(self, parent_colour: int, child_colour: int) -> LabelLaw:
        """Law for 1-based colour pair (parent, child)."""
        return self.laws[parent_colour - 1][child_colour - 1]

    def entries(self):
        for i, row in enumerate(self.laws):
            for j, law in enumerate(row):
                yield i, j, law

    def shared_domain(self) -> MomentDomain:
        lo = max(law.domain().lower for _, _, law in self.entries())
        hi = min(law.domain().upper for _, _, law in self.entries())
        return MomentDomain(lo, hi)

    def support_upper(self) -> float:
        return max(law.support_upper() for _, _, law in self.entries())

    def all_supports_at_most_one(self) -> bool:
        """True when every label is almost surely <= 1 (certifies pruning)."""
        return self.support_upper() <= 1.0


# -- admissibility -------------------------------------------------------------


@dataclass(frozen=True)
class EntryCheck:
    parent: int
    child: int
    family: str
    unit_interval_in_domain: bool
    zero_in_interior: bool
    abs_log_moment_finite: bool
    x_log_x_moment_finite: bool
    smooth_c2: bool
    degenerate_law: bool

    @property
    def admissible(self) -> bool:
        return (
            self.unit_interval_in_domain
            and self.zero_in_interior
            and self.abs_log_moment_finite
            and self.x_log_x_moment_finite
        )


@dataclass(frozen=True)
class AdmissibilityReport:
    entries: tuple[EntryCheck, ...]
    all_admissible: bool
    smooth_c2: bool
    degenerate: bool
    warnings: tuple[str, ...]


def check_conditions(model: ModelSpec) -> AdmissibilityReport:
    """Admissibility report for every entry of a model.

    The shipped families satisfy every moment condition by construction;
    the per-entry booleans record this from the closed-form domains.  The
    model-level ``degenerate`` flag is set when all d^2 laws are the same
    point mass, in which case log-value sums have zero variance and strict
    convexity of the growth analysis fails.
    """
    checks = []
    for i, j, law in model.entries():
        dom = law.domain()
        checks.append(
            EntryCheck(
                parent=i + 1,
                child=j + 1,
                family=type(law).__name__,
                unit_interval_in_domain=dom.covers_unit_interval(),
                zero_in_interior=dom.zero_in_interior(),
                # finite atoms, Gaussian or bounded logs: E|log xi| and
                # E|xi log xi| are finite whenever [-eps, 1+eps] is in the domain
                abs_log_moment_finite=dom.zero_in_interior(),
                x_log_x_moment_finite=dom.covers_unit_interval()
                and dom.upper > 1.0,
                smooth_c2=True,
                degenerate_law=law.is_degenerate,
            )
        )
    all_det = all(c.degenerate_law for c in checks)
    degenerate = False
    if all_det:
        logs = {math.log(law.value) for _, _, law in model.entries()}  # type: ignore[attr-defined]
        degenerate = len(logs) == 1
    warnings = []
    if degenerate:
        warnings.append("degenerate: all laws are one identical point mass")
    elif all_det:
        warnings.append("all laws deterministic: path sums are colour-driven only")
    return AdmissibilityReport(
        entries=tuple(checks),
        all_admissible=all(c.admissible for c in checks),
        smooth_c2=all(c.smooth_c2 for c in checks),
        degenerate=degenerate,
        warnings=tuple(warnings),
    )


# -- real-valued input laws (passage times / jumps) ----------------------------


class RealLaw(abc.ABC):
    """Real-valued law used as a passage-time or jump input.

    These never get sampled directly; they are pushed forward to a positive
    label law through x -> exp(-x) before any analysis or simulation.
    """


@dataclass(frozen=True)
class Normal(RealLaw):
    mean: float
    sd: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValidationError("mean must be finite")
        if not (self.sd > 0.0 and math.isfinite(self.sd)):
            raise ValidationError("sd must be strictly positive")


@dataclass(frozen=True)
class AtomicReal(RealLaw):
    atoms: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        atoms = tuple(float(x) for x in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        if len(atoms) == 0 or len(atoms) != len(probs):
            raise ValidationError("atoms and probs must be nonempty and equal length")
        if any(not math.isfinite(x) for x in atoms):
            raise ValidationError("atoms must be finite")
        if any(p < 0.0 for p in probs):
            raise ValidationError("probabilities must be nonnegative")
        total = math.fsum(probs)
        if abs(total - 1.0) > _PROB_SLACK:
            raise ValidationError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", tuple(p / total for p in probs))


@dataclass(frozen=True)
class UniformReal(RealLaw):
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValidationError("require finite a < b")


@dataclass(frozen=True)
class DeterministicReal(RealLaw):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError("value must be finite")
