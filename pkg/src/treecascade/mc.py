"""Monte Carlo machinery and exact oracles for the tree model.

Two independent estimators of the expected high-value count ship on
purpose.  ``enumerate_Z`` grows the coloured tree realisation by
realisation; ``estimate_EZ`` never touches a tree and instead sums
``d^n P(S_n >= -t)`` over levels with path sampling, which is the identity
the expectation satisfies under randomized colouring.  Their agreement ties
the generative model to the spectral analysis.  For purely atomic label
laws a lattice dynamic program gives the level probabilities exactly.

Conventions used throughout:

* colours are 1-based in public signatures, 0-based in arrays;
* thresshold comparisons use an absolute slack ``BOUNDARY_ATOL`` so that
  lattice models hitting a boundary atom exactly are counted inclusively
  regardless of float accumulation order;
* every stochastic routine takes a ``numpy.random.Generator``; replicated
  work spawns one child stream per fixed-size chunk, so results are
  bit-identical for any worker count.

Infinite level sums are truncated with a certified bound: for any exponent
s with ``rho(s) < 1``,

    sum_{n >= N} d^n P(S_n >= -t) <= e^{s t} kappa(s) rho(s)^N / (1 - rho(s)),

where ``kappa`` is a Perron-eigenvector ratio.  The bound is valid at every
such s, so the reported tail certificates hold regardless of how well the
inner search locates the optimum.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionViolation,
    InsufficientHits,
    MemoryBudgetExceeded,
    NoConvergence,
    NotLattice,
    ValidationError,
)
from .exponents import Regime, classify
from .laws import ModelSpec
from .optimize import bisect_root, golden_min
from .spectral import S_SEARCH_MAX, RateFunction, SpectralCurve

__all__ = [
    "BOUNDARY_ATOL",
    "DEFAULT_PARTICLE_BUDGET",
    "BUDGET_ENV_VAR",
    "particle_budget",
    "PathSampler",
    "CountResult",
    "BrwSnapshot",
    "LatticeDp",
    "TreeRealization",
    "grow_colored_tree",
    "enumerate_Z",
    "enumerate_Z_mean",
    "lattice_dp_EZ",
    "estimate_EZ",
    "LdRate",
    "estimate_ld_rate",
    "ld_sweep",
    "simulate_brw",
    "chernoff_level_tail",
]

BOUNDARY_ATOL = 1e-9
DEFAULT_PARTICLE_BUDGET = 10**8
BUDGET_ENV_VAR = "BRANCH_EXPONENT_BUDGET"


def particle_budget(override: int | None = None) -> int:
    """Particle/node budget; env var BRANCH_EXPONENT_BUDGET overrides the default."""
    if override is not None:
        return int(override)
    env = os.environ.get(BUDGET_ENV_VAR)
    return int(float(env)) if env else DEFAULT_PARTICLE_BUDGET


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    # counter-based Philox keyed by the master seed: cheap to split per replica
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(rng))))


def _curve_for(model: ModelSpec, curve: SpectralCurve | None) -> SpectralCurve:
    if curve is not None:
        return curve
    return SpectralCurve(model)


def _require_finite(model: ModelSpec, curve: SpectralCurve) -> None:
    regime = classify(curve)
    if regime is not Regime.FINITE:
        raise AssumptionViolation(f"regime {regime.value}: simulation undefined")


def _sample_log_labels(
    model: ModelSpec,
    parent_colours: np.ndarray,
    child_colours: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Log-labels for flat arrays of 0-based (parent, child) colour pairs."""
    out = np.empty(parent_colours.shape)
    for i in range(model.d):
        for j in range(model.d):
            mask = (parent_colours == i) & (child_colours == j)
            k = int(mask.sum())
            if k:
                out[mask] = np.log(model.laws[i][j].sample_array(rng, k))
    return out


# -- path sampling -------------------------------------------------------------


@dataclass
class PathSampler:
    """Sampler of log-label sums along a single root path.

    The root colour is fixed; every later colour on the path is independent
    uniform on {1..d}, which is the single-path law under randomized
    colouring of the tree.
    """

    model: ModelSpec
    root_colour: int = 1
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        if not 1 <= self.root_colour <= self.model.d:
            raise ValidationError(f"root colour must be in 1..{self.model.d}")
        self.rng = _as_generator(self.rng)

    def sample_colours(self, reps: int, depth: int) -> np.ndarray:
        """(reps, depth + 1) 0-based colour chains starting at the root colour."""
        cols = np.empty((reps, depth + 1), dtype=np.int64)
        cols[:, 0] = self.root_colour - 1
        cols[:, 1:] = self.rng.integers(0, self.model.d, size=(reps, depth))
        return cols

    def sample_sums(self, reps: int, depth: int) -> np.ndarray:
        """(reps, depth) cumulative log-label sums S_1..S_depth."""
        cols = self.sample_colours(reps, depth)
        incr = _sample_log_labels(self.model, cols[:, :-1], cols[:, 1:], self.rng)
        return np.cumsum(incr, axis=1)


def _tilted_sums(
    model: ModelSpec,
    root_colour: int,
    s: float,
    reps: int,
    depth: int,
    rng: np.random.Generator,
    curve: SpectralCurve,
) -> tuple[np.ndarray, np.ndarray]:
    """Final sums S_n under the s-tilted path measure, with log-weights.

    The tilted measure moves the colour chain by the Perron right
    eigenvector and each label by an exponential tilt; the returned
    log-weights turn tilted averages back into plain-measure expectations.
    """
    d = model.d
    triple = curve.perron_at(s)
    v = triple.right
    entry = curve._eval(s)  # scaled moment matrix; rows i: a_ij v_j = rho_a v_i
    q = entry.a * v[None, :] / (entry.rho_a * v[:, None])
    q = q / q.sum(axis=1, keepdims=True)  # renormalise away rounding
    cumq = np.cumsum(q, axis=1)

    cur = np.full(reps, root_colour - 1, dtype=np.int64)
    first = cur.copy()
    total = np.zeros(reps)
    for _ in range(depth):
        u = rng.random(reps)
        nxt = (u[:, None] > cumq[cur]).sum(axis=1)
        np.clip(nxt, 0, d - 1, out=nxt)
        incr = np.empty(reps)
        for i in range(d):
            for j in range(d):
                mask = (cur == i) & (nxt == j)
                k = int(mask.sum())
                if k:
                    incr[mask] = np.log(
                        model.laws[i][j].tilted_sample_array(s, rng, k)
                    )
        total += incr
        cur = nxt
    log_w = (
        depth * (curve.log_rho(s) - math.log(d))
        - s * total
        + np.log(v[first])
        - np.log(v[cur])
    )
    return total, log_w


# -- certified tail bounds -------------------------------------------------------


def _subunit_window(curve: SpectralCurve, xtol: float = 1e-9) -> tuple[float, float]:
    """Interval of exponents with rho < 1, from the two-root structure."""
    root = curve.min_perron_root()
    if root.value >= 1.0:
        raise AssumptionViolation("rho never drops below 1: no sub-unit window")
    s_lo = bisect_root(curve.log_rho, 0.0, root.s_argmin, xtol,
                       f_lo=curve.log_rho(0.0), f_hi=math.log(root.value))
    if root.at_boundary or curve.log_rho(S_SEARCH_MAX) < 0.0:
        s_hi = S_SEARCH_MAX
    else:
        s_hi = bisect_root(curve.log_rho, root.s_argmin, S_SEARCH_MAX, xtol)
    return s_lo, s_hi


def _log_tail_at(curve: SpectralCurve, t: float, n_from: int, s: float,
                 root_colour: int) -> float:
    """log of the certified bound on sum_{n >= n_from} d^n P(S_n >= -t) at exponent s."""
    log_rho = curve.log_rho(s)
    if log_rho >= 0.0:
        return math.inf
    v = curve.perron_at(s).right
    kappa = math.log(v[root_colour - 1] / float(np.min(v)))
    return s * t + kappa + n_from * log_rho - math.log1p(-math.exp(log_rho))


def chernoff_level_tail(
    model: ModelSpec,
    t: float,
    n_from: int,
    root_colour: int = 1,
    curve: SpectralCurve | None = None,
) -> float:
    """Certified upper bound on the level sum from ``n_from`` onward."""
    curve = _curve_for(model, curve)
    s_lo, s_hi = _subunit_window(curve)
    lo = s_lo + max(1e-6, 1e-6 * s_lo)
    obj = lambda s: _log_tail_at(curve, t, n_from, s, root_colour)
    s_star, log_bound = golden_min(obj, lo, s_hi, 1e-6)
    return math.exp(min(log_bound, 700.0))


def _cap_for_tail(
    curve: SpectralCurve, t: float, target: float, root_colour: int
) -> tuple[int, float]:
    """Smallest level cap with certified tail below ``target``, plus the bound.

    The bound is valid at every sub-unit exponent, so optimising the cap
    over s only sharpens it; whatever s the search lands on certifies.
    """
    s_lo, s_hi = _subunit_window(curve)
    lo = s_lo + max(1e-6, 1e-6 * s_lo)
    log_target = math.log(target)

    def cap_at(s: float) -> float:
        log_rho = curve.log_rho(s)
        if log_rho >= 0.0:
            return math.inf
        v = curve.perron_at(s).right
        kappa = math.log(v[root_colour - 1] / float(np.min(v)))
        numer = log_target - s * t - kappa + math.log1p(-math.exp(log_rho))
        return numer / log_rho  # log_rho < 0: N grows as target shrinks

    s_star, n_float = golden_min(cap_at, lo, s_hi, 1e-6)
    if not math.isfinite(n_float):
        raise NoConvergence("could not certify a finite level cap")
    cap = max(1, math.ceil(n_float))
    bound = math.exp(min(_log_tail_at(curve, t, cap + 1, s_star, root_colour), 700.0))
    return cap, bound


# -- results ---------------------------------------------------------------------


@dataclass(frozen=True)
class CountResult:
    """One high-value count (exact mode) or an expectation estimate."""

    t: float
    z_value: int | None = None
    ez_estimate: float | None = None
    se: float | None = None
    reps: int = 1
    truncation_depth: int = 0
    tail_bound: float = 0.0
    exact: bool = False


@dataclass(frozen=True)
class BrwSnapshot:
    """Per-generation population summary of the branching random walk."""

    generation: int
    reps: int
    min_mean: float
    min_pooled: float
    counts_le: dict[float, float]
    q10: float
    q50: float
    q90: float


# -- explicit tree realisations ---------------------------------------------------


@dataclass(frozen=True)
class TreeRealization:
    """A sampled coloured tree with per-edge labels and per-vertex values."""

    d: int
    depth: int
    colours: np.ndarray        # 1-based colour per vertex, BFS order
    parent: np.ndarray         # vertex index of the parent, -1 at the root
    edge_log_label: np.ndarray  # log label on the edge to the parent, nan at root
    log_value: np.ndarray      # cumulative log label product from the root
    level_offsets: np.ndarray  # start index of each level, plus end sentinel

    def level_slice(self, n: int) -> slice:
        return slice(int(self.level_offsets[n]), int(self.level_offsets[n + 1]))

    def count_value_ge(self, t: float) -> int:
        """Number of vertices with value at least exp(-t)."""
        return int(np.sum(self.log_value >= -t - BOUNDARY_ATOL))

    def level_counts_value_ge(self, t: float) -> np.ndarray:
        qualify = self.log_value >= -t - BOUNDARY_ATOL
        return np.array(
            [int(np.sum(qualify[self.level_slice(n)])) for n in range(self.depth + 1)]
        )

    def children_of(self, vertex: int) -> np.ndarray:
        return np.where(self.parent == vertex)[0]


def grow_colored_tree(
    model: ModelSpec,
    depth: int,
    rng,
    root_colour: int | None = None,
    budget: int | None = None,
) -> TreeRealization:
    """Sample an explicit coloured tree of the given depth.

    Child colours come from one uniform permutation of {1..d} per vertex, so
    siblings always carry d distinct colours while any single child slot is
    uniform.
    """
    rng = _as_generator(rng)
    d = model.d
    n_vertices = (d ** (depth + 1) - 1) // (d - 1)
    if n_vertices > particle_budget(budget):
        raise MemoryBudgetExceeded(
            f"{n_vertices} vertices exceed budget {particle_budget(budget)}"
        )
    if root_colour is None:
        root0 = int(rng.integers(0, d))
    else:
        if not 1 <= root_colour <= d:
            raise ValidationError(f"root colour must be in 1..{d}")
        root0 = root_colour - 1

    colours = [np.array([root0])]
    parents = [np.array([-1])]
    labels = [np.array([math.nan])]
    log_values = [np.array([0.0])]
    offsets = [0, 1]
    base = 0
    for _ in range(depth):
        pc = colours[-1]
        count = len(pc)
        # one uniform permutation of colours per parent
        perm = np.argsort(rng.random((count, d)), axis=1)
        child_colours = perm.reshape(-1)
        parent_rep = np.repeat(np.arange(count) + base, d)
        parent_colours = np.repeat(pc, d)
        lab = _sample_log_labels(model, parent_colours, child_colours, rng)
        colours.append(child_colours)
        parents.append(parent_rep)
        labels.append(lab)
        log_values.append(np.repeat(log_values[-1], d) + lab)
        base = offsets[-1]
        offsets.append(offsets[-1] + count * d)
    return TreeRealization(
        d=d,
        depth=depth,
        colours=np.concatenate(colours) + 1,
        parent=np.concatenate(parents),
        edge_log_label=np.concatenate(labels),
        log_value=np.concatenate(log_values),
        level_offsets=np.array(offsets),
    )


# -- tree enumeration of Z ---------------------------------------------------------


def _enumerate_batch(
    model: ModelSpec,
    t: float,
    depth_cap: int,
    reps: int,
    rng: np.random.Generator,
    budget: int,
) -> tuple[np.ndarray, bool]:
    """Counts for ``reps`` independent trees, level-synchronous across replicas.

    Returns ``(counts, truncated)``; ``truncated`` is set when live vertices
    remained at the depth cap.  When every label is a.s. at most 1 a subtree
    below the threshold can never recover, so it is pruned exactly.
    """
    d = model.d
    certified = model.all_supports_at_most_one()
    threshold = -t - BOUNDARY_ATOL

    counts = np.ones(reps, dtype=np.int64)  # the root always qualifies for t >= 0
    rep_idx = np.arange(reps)
    live_colour = np.zeros(reps, dtype=np.int64)  # root colour 1
    live_logv = np.zeros(reps)
    nodes = reps
    truncated = False
    for _ in range(depth_cap):
        if len(rep_idx) == 0:
            break
        parent_colours = np.repeat(live_colour, d)
        child_colours = np.tile(np.arange(d), len(live_colour))
        child_rep = np.repeat(rep_idx, d)
        lab = _sample_log_labels(model, parent_colours, child_colours, rng)
        child_logv = np.repeat(live_logv, d) + lab
        nodes += len(child_logv)
        if nodes > budget:
            raise MemoryBudgetExceeded(f"node budget {budget} exceeded")
        qualify = child_logv >= threshold
        counts += np.bincount(child_rep[qualify], minlength=reps)
        if certified:
            keep = qualify
        else:
            keep = np.ones(len(child_logv), dtype=bool)
        rep_idx = child_rep[keep]
        live_colour = child_colours[keep]
        live_logv = child_logv[keep]
    else:
        truncated = len(rep_idx) > 0
    return counts, truncated


def enumerate_Z(
    model: ModelSpec,
    t: float,
    depth_cap: int,
    rng,
    budget: int | None = None,
    curve: SpectralCurve | None = None,
) -> CountResult:
    """Count high-value vertices in one sampled tree realisation."""
    if t < 0.0:
        raise ValidationError("t must be nonnegative")
    if depth_cap < 1:
        raise ValidationError("depth_cap must be >= 1")
    curve = _curve_for(model, curve)
    _require_finite(model, curve)
    rng = _as_generator(rng)
    counts, truncated = _enumerate_batch(
        model, t, depth_cap, 1, rng, particle_budget(budget)
    )
    exact = not truncated
    tail = 0.0 if exact else chernoff_level_tail(model, t, depth_cap + 1, curve=curve)
    return CountResult(
        t=t,
        z_value=int(counts[0]),
        reps=1,
        truncation_depth=depth_cap,
        tail_bound=tail,
        exact=exact,
    )


def enumerate_Z_mean(
    model: ModelSpec,
    t: float,
    depth_cap: int,
    reps: int,
    rng,
    budget: int | None = None,
    curve: SpectralCurve | None = None,
) -> CountResult:
    """Mean high-value count over independent tree realisations."""
    if t < 0.0:
        raise ValidationError("t must be nonnegative")
    if reps < 1 or depth_cap < 1:
        raise ValidationError("reps and depth_cap must be >= 1")
    curve = _curve_for(model, curve)
    _require_finite(model, curve)
    rng = _as_generator(rng)
    counts, truncated = _enumerate_batch(
        model, t, depth_cap, reps, rng, particle_budget(budget)
    )
    exact = not truncated
    tail = 0.0 if exact else chernoff_level_tail(model, t, depth_cap + 1, curve=curve)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    return CountResult(
        t=t,
        ez_estimate=mean,
        se=se,
        reps=reps,
        truncation_depth=depth_cap,
        tail_bound=tail,
        exact=exact,
    )


# -- exact lattice dynamic program --------------------------------------------------


@dataclass(frozen=True)
class LatticeDp:
    """Exact truncated level sum with a certified tail."""

    value: float
    tail_bound: float
    level_probs: np.ndarray  # P(S_n >= -t) for n = 0..n_levels
    n_levels: int
    lattice_step: float


def _float_gcd(values: np.ndarray, tol: float = 1e-9) -> float:
    g = 0.0
    for v in np.abs(values):
        if v < tol:
            continue
        while v > tol:
            g, v = v, math.fmod(g, v)
    return g


def lattice_dp_EZ(
    model: ModelSpec,
    t: float,
    rel_tail: float = 1e-12,
    root_colour: int = 1,
    curve: SpectralCurve | None = None,
) -> LatticeDp:
    """Exact E[Z(e^-t)] for models whose log-atoms share an arithmetic lattice.

    Works over the joint state (colour, lattice position) of the path chain,
    truncating once the certified tail drops below ``rel_tail`` (relative to
    1, itself a lower bound on the sum for t >= 0).
    """
    if t < 0.0:
        raise ValidationError("t must be nonnegative")
    curve = _curve_for(model, curve)
    _require_finite(model, curve)
    d = model.d

    atom_logs = {}
    all_values = []
    for i, j, law in model.entries():
        la = law.log_atoms()
        if la is None:
            raise NotLattice(f"law at ({i + 1},{j + 1}) is not purely atomic")
        atom_logs[(i, j)] = la
        all_values.extend(la[0].tolist())
    values = np.asarray(all_values)
    h = _float_gcd(values)
    if h == 0.0:
        raise NotLattice("all log-atoms are zero")
    if h < 1e-6 * float(np.max(np.abs(values))):
        raise NotLattice("log-atoms look incommensurable (no usable lattice step)")
    steps = values / h
    if np.max(np.abs(steps - np.round(steps))) > 1e-6:
        raise NotLattice(f"log-atoms not on a common lattice (step {h:g})")

    int_atoms = {
        key: (np.round(la / h).astype(int), pa) for key, (la, pa) in atom_logs.items()
    }
    k_min = min(int(v.min()) for v, _ in int_atoms.values())
    k_max = max(int(v.max()) for v, _ in int_atoms.values())

    cap, tail = _cap_for_tail(curve, t, rel_tail, root_colour)
    k_threshold = math.ceil((-t - BOUNDARY_ATOL) / h) if h > 0 else 0
    # position k counts when k*h >= -t - atol, i.e. k >= ceil((-t - atol)/h)

    # the array must cover every reachable position at every level up to the
    # cap, including the starting position 0
    offset = min(0, cap * k_min)
    top = max(0, cap * k_max)
    span = top - offset + 1
    probs = np.zeros((d, span))
    root0 = root_colour - 1
    probs[root0, -offset] = 1.0

    level_probs = [1.0]  # n = 0: S_0 = 0 >= -t for t >= 0
    total = 1.0
    d_pow = 1.0
    for n in range(1, cap + 1):
        new = np.zeros_like(probs)
        for i in range(d):
            row = probs[i]
            if not row.any():
                continue
            for j in range(d):
                ks, ps = int_atoms[(i, j)]
                for k, p in zip(ks, ps):
                    w = p / d
                    if k >= 0:
                        new[j, k:] += w * row[: span - k] if k else w * row
                    else:
                        new[j, : span + k] += w * row[-k:]
        probs = new
        idx0 = k_threshold - offset
        p_n = float(probs[:, max(idx0, 0):].sum()) if idx0 < span else 0.0
        level_probs.append(p_n)
        d_pow *= d
        total += d_pow * p_n
    return LatticeDp(
        value=total,
        tail_bound=tail,
        level_probs=np.asarray(level_probs),
        n_levels=cap,
        lattice_step=h,
    )


# -- level-sum estimator of E[Z] ------------------------------------------------------


def _ez_worker(model, root_colour, t_grid, caps, depth, reps, stream):
    """Per-chunk sums and sums of squares of the level-sum statistic."""
    sampler = PathSampler(model, root_colour, stream)
    sums = sampler.sample_sums(reps, depth)
    out_sum = np.empty(len(t_grid))
    out_sq = np.empty(len(t_grid))
    d = model.d
    for k, (t, cap) in enumerate(zip(t_grid, caps)):
        weights = np.power(float(d), np.arange(1, cap + 1))
        ind = sums[:, :cap] >= (-t - BOUNDARY_ATOL)
        y = 1.0 + ind @ weights  # n = 0 term always contributes 1 for t >= 0
        out_sum[k] = float(y.sum())
        out_sq[k] = float((y * y).sum())
    return reps, out_sum, out_sq


def estimate_EZ(
    model: ModelSpec,
    t_grid,
    reps: int,
    rng,
    root_colour: int = 1,
    tail_target: float = 1e-12,
    workers: int = 1,
    chunk_size: int = 20_000,
    curve: SpectralCurve | None = None,
) -> list[CountResult]:
    """Estimate E[Z(e^-t)] on a t-grid by the level-sum identity.

    One set of sampled root paths is shared across the whole grid.  Each
    level cap carries a certified tail bound below ``tail_target``; since
    the n = 0 term already contributes 1, the bound is also a relative one.
    """
    t_grid = [float(t) for t in t_grid]
    if any(t < 0.0 for t in t_grid):
        raise ValidationError("t values must be nonnegative")
    if reps < 2:
        raise ValidationError("reps must be >= 2")
    curve = _curve_for(model, curve)
    _require_finite(model, curve)
    rng = _as_generator(rng)

    caps, tails = [], []
    for t in t_grid:
        cap, tail = _cap_for_tail(curve, t, tail_target, root_colour)
        caps.append(cap)
        tails.append(tail)
    depth = max(caps)

    n_chunks = math.ceil(reps / chunk_size)
    sizes = [chunk_size] * (n_chunks - 1) + [reps - chunk_size * (n_chunks - 1)]
    streams = rng.spawn(n_chunks)
    jobs = [
        (model, root_colour, t_grid, caps, depth, size, stream)
        for size, stream in zip(sizes, streams)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ez_job, jobs))
    else:
        results = [_ez_job(job) for job in jobs]

    total = np.zeros(len(t_grid))
    total_sq = np.zeros(len(t_grid))
    n_total = 0
    for n, s1, s2 in results:
        n_total += n
        total += s1
        total_sq += s2
    out = []
    for k, t in enumerate(t_grid):
        mean = float(total[k]) / n_total
        var = (float(total_sq[k]) - n_total * mean * mean) / (n_total - 1)
        se = math.sqrt(max(var, 0.0) / n_total)
        out.append(
            CountResult(
                t=t,
                ez_estimate=mean,
                se=se,
                reps=n_total,
                truncation_depth=caps[k],
                tail_bound=tails[k],
                exact=False,
            )
        )
    return out


def _ez_job(job):
    model, root_colour, t_grid, caps, depth, size, stream = job
    return _ez_worker(model, root_colour, t_grid, caps, depth, size, stream)


# -- empirical large-deviation rates ---------------------------------------------------


@dataclass(frozen=True)
class LdRate:
    """Empirical decay rate of P(S_n / n >= a) with its standard error."""

    a: float
    n: int
    rate: float
    se: float
    p_hat: float
    p_se: float
    hits: int
    reps: int
    tilted: bool


def estimate_ld_rate(
    model: ModelSpec,
    a: float,
    n: int,
    reps: int,
    rng,
    root_colour: int = 1,
    tilt_s: float | None = None,
    min_hits: int = 100,
    chunk_size: int = 100_000,
    curve: SpectralCurve | None = None,
) -> LdRate:
    """Empirical -(1/n) log P(S_n / n >= a).

    Plain Monte Carlo by default.  With ``tilt_s`` the paths are sampled
    under the exponential tilt at that exponent and reweighted, which is
    how rates far beyond plain-MC reach stay estimable; hits then count
    tilted samples landing in the event.
    """
    if n < 1 or reps < 1:
        raise ValidationError("n and reps must be >= 1")
    rng = _as_generator(rng)
    if tilt_s is not None:
        curve = _curve_for(model, curve)
    threshold = a * n - BOUNDARY_ATOL

    hits = 0
    acc = 0.0
    acc_sq = 0.0
    done = 0
    sampler = PathSampler(model, root_colour, rng)
    while done < reps:
        batch = min(chunk_size, reps - done)
        if tilt_s is None:
            s_n = sampler.sample_sums(batch, n)[:, -1]
            x = (s_n >= threshold).astype(float)
        else:
            s_n, log_w = _tilted_sums(model, root_colour, tilt_s, batch, n, rng, curve)
            ind = s_n >= threshold
            x = np.where(ind, np.exp(log_w), 0.0)
        hits += int(np.count_nonzero(x))
        acc += float(x.sum())
        acc_sq += float((x * x).sum())
        done += batch
    if hits < min_hits:
        raise InsufficientHits(
            f"{hits} hits < {min_hits} required at a={a}, n={n}, reps={reps}"
        )
    p_hat = acc / reps
    var = (acc_sq - reps * p_hat * p_hat) / (reps - 1) if reps > 1 else math.inf
    p_se = math.sqrt(max(var, 0.0) / reps)
    rate = -math.log(p_hat) / n
    se = p_se / (p_hat * n)
    return LdRate(
        a=a, n=n, rate=rate, se=se, p_hat=p_hat, p_se=p_se,
        hits=hits, reps=reps, tilted=tilt_s is not None,
    )


def ld_sweep(
    model: ModelSpec,
    a_grid,
    n: int,
    rng,
    root_colour: int = 1,
    min_hits: int = 100,
    max_plain_reps: int = 2_000_000,
    tilted_reps: int = 200_000,
    curve: SpectralCurve | None = None,
) -> list[LdRate]:
    """Uniform-grid empirical rate check over ``a_grid``.

    Replicas adapt per point: plain sampling doubles its budget until the
    hit quota is met, and switches to the exponential tilt at the
    rate-optimal exponent once the predicted plain budget is out of reach.
    """
    rng = _as_generator(rng)
    curve = _curve_for(model, curve)
    rf = RateFunction(curve)
    out = []
    for a in a_grid:
        rate_pred, s0 = rf.rate(float(a))
        p_pred = math.exp(-n * rate_pred) if math.isfinite(rate_pred) else 0.0
        needed = min_hits / p_pred * 3.0 if p_pred > 0 else math.inf
        if needed > max_plain_reps and s0 > 0.0:
            out.append(
                estimate_ld_rate(
                    model, float(a), n, tilted_reps, rng,
                    root_colour=root_colour, tilt_s=s0,
                    min_hits=min_hits, curve=curve,
                )
            )
            continue
        reps = int(min(max(needed, 20_000), max_plain_reps))
        while True:
            try:
                out.append(
                    estimate_ld_rate(
                        model, float(a), n, reps, rng,
                        root_colour=root_colour, min_hits=min_hits, curve=curve,
                    )
                )
                break
            except InsufficientHits:
                if reps >= max_plain_reps:
                    if s0 > 0.0:
                        out.append(
                            estimate_ld_rate(
                                model, float(a), n, tilted_reps, rng,
                                root_colour=root_colour, tilt_s=s0,
                                min_hits=min_hits, curve=curve,
                            )
                        )
                        break
                    raise
                reps = min(reps * 2, max_plain_reps)
    return out


# -- branching random walk ----------------------------------------------------------


def simulate_brw(
    model: ModelSpec,
    n_max: int,
    reps: int,
    rng,
    t_grid=(),
    root_colour: int = 1,
    budget: int | None = None,
    quantile_cap: int = 4096,
) -> list[BrwSnapshot]:
    """Full-population multi-type branching random walk.

    Jumps are ``-log`` of the labels, so a particle's position equals minus
    the log-value of its tree vertex; counting particles at or left of t is
    counting vertices of value at least exp(-t).
    """
    if n_max < 1 or reps < 1:
        raise ValidationError("n_max and reps must be >= 1")
    d = model.d
    if d**n_max * reps > particle_budget(budget):
        raise MemoryBudgetExceeded(
            f"d^n_max * reps = {d**n_max * reps} exceeds budget {particle_budget(budget)}"
        )
    if not 1 <= root_colour <= d:
        raise ValidationError(f"root colour must be in 1..{d}")
    rng = _as_generator(rng)
    t_grid = [float(t) for t in t_grid]

    streams = rng.spawn(reps)
    mins = np.zeros((reps, n_max))
    counts = np.zeros((reps, n_max, len(t_grid)))
    qsamples: list[list[np.ndarray]] = [[] for _ in range(n_max)]
    for r, stream in enumerate(streams):
        types = np.zeros(1, dtype=np.int64)
        types[0] = root_colour - 1
        pos = np.zeros(1)
        for g in range(n_max):
            parent_types = np.repeat(types, d)
            child_types = np.tile(np.arange(d), len(types))
            lab = _sample_log_labels(model, parent_types, child_types, stream)
            pos = np.repeat(pos, d) - lab  # jump = -log label
            types = child_types
            mins[r, g] = float(pos.min())
            for k, t in enumerate(t_grid):
                counts[r, g, k] = float(np.sum(pos <= t + BOUNDARY_ATOL))
            stride = max(1, len(pos) // max(1, quantile_cap // reps))
            qsamples[g].append(pos[::stride])
    out = []
    for g in range(n_max):
        pooled = np.concatenate(qsamples[g])
        q10, q50, q90 = np.quantile(pooled, [0.1, 0.5, 0.9])
        out.append(
            BrwSnapshot(
                generation=g + 1,
                reps=reps,
                min_mean=float(mins[:, g].mean()),
                min_pooled=float(mins[:, g].min()),
                counts_le={t: float(counts[:, g, k].mean()) for k, t in enumerate(t_grid)},
                q10=float(q10),
                q50=float(q50),
                q90=float(q90),
            )
        )
    return out
