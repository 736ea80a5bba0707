"""Growth exponents for multiplicative cascades on coloured d-ary trees.

Given a d x d matrix of strictly positive label laws, the package computes
the exponential growth rate of the expected number of high-value vertices
by two independent routes (a variational formula over the large-deviation
rate function, and the smaller root of the Perron curve), classifies the
finite/infinite regime, derives first-passage-percolation and
branching-random-walk quantities, and verifies all of it by Monte Carlo.
"""

from .errors import (
    AssumptionViolation,
    BracketingFailure,
    DomainError,
    InsufficientHits,
    MemoryBudgetExceeded,
    NoConvergence,
    NonPositiveMatrix,
    NotLattice,
    ParseError,
    TreeCascadeError,
    UnsupportedLaw,
    ValidationError,
)
from .laws import (
    AdmissibilityReport,
    Atomic,
    AtomicReal,
    Deterministic,
    DeterministicReal,
    LabelLaw,
    LogNormal,
    LogUniform,
    ModelSpec,
    MomentDomain,
    Normal,
    RealLaw,
    UniformReal,
    check_conditions,
)
from .spectral import (
    MinPerronRoot,
    PerronTriple,
    RateFunction,
    SpectralCurve,
    build_m,
    lambda_inf,
    level_log_moment,
    level_moment,
    perron,
)
from .exponents import (
    BrwSpeed,
    ExponentReport,
    Regime,
    brw_speed,
    build_report,
    classify,
    fpp_transform,
    growth_exponent_spectral,
    growth_exponent_variational,
)
from .mc import (
    BrwSnapshot,
    CountResult,
    LatticeDp,
    LdRate,
    PathSampler,
    TreeRealization,
    chernoff_level_tail,
    enumerate_Z,
    enumerate_Z_mean,
    estimate_EZ,
    estimate_ld_rate,
    grow_colored_tree,
    lattice_dp_EZ,
    ld_sweep,
    simulate_brw,
)

__version__ = "0.1.0"
