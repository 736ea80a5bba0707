"""Config-driven command line interface.

One JSON config fully determines a run:

    {
      "d": 2,
      "laws": {"family": "log_normal", "params": {"m0": -1.5, "sigma": 1.0}},
      "command": "analyze",
      "t_grid": [5, 10, 15, 20, 25],
      "reps": 100000,
      "depth_cap": 20,
      "seed": 20260810,
      "output": "out/gaussian"
    }

``laws`` is either a single law object (used i.i.d. for every colour pair)
or a full d x d matrix of them.  For the ``fpp`` and ``brw`` commands the
laws are real-valued passage-time/jump laws (families ``normal``,
``atomic``, ``uniform``, ``deterministic``), pushed through x -> exp(-x)
before analysis; for every other command they are positive label laws
(families ``atomic``, ``log_normal``, ``log_uniform``, ``deterministic``).

Commands and the files they write (``output`` is a base path):

* ``analyze``  -> ``<output>_report.json``
* ``simulate`` -> ``<output>_counts.csv``
* ``ld-check`` -> ``<output>_ldcheck.csv`` (grid = t_grid, path length = depth_cap)
* ``brw``      -> ``<output>_brw.csv``
* ``fpp``      -> ``<output>_report.json`` and ``<output>_counts.csv``
* ``verify``   -> ``<output>_verify.csv``; nonzero exit on any failed check

Exit codes: 0 ok, 1 verify-invariant failure, 2 parse, 3 validation,
4 assumption, 5 convergence, 6 budget.  Identical config and seed produce
byte-identical result files regardless of ``--workers``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

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
from .exponents import Regime, brw_speed, build_report, classify, fpp_transform
from .laws import (
    Atomic,
    AtomicReal,
    Deterministic,
    DeterministicReal,
    LabelLaw,
    LogNormal,
    LogUniform,
    ModelSpec,
    Normal,
    RealLaw,
    UniformReal,
    check_conditions,
)
from .mc import (
    PathSampler,
    enumerate_Z_mean,
    estimate_EZ,
    ld_sweep,
    simulate_brw,
)
from .spectral import RateFunction, SpectralCurve, level_log_moment

COMMANDS = ("analyze", "simulate", "ld-check", "brw", "fpp", "verify")
STOCHASTIC_COMMANDS = ("simulate", "ld-check", "brw", "fpp", "verify")
REAL_LAW_COMMANDS = ("fpp", "brw")
TOLERANCE_KEYS = ("perron_tol", "xtol")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_ASSUMPTION = 4
EXIT_CONVERGENCE = 5
EXIT_BUDGET = 6


@dataclass(frozen=True)
class RunConfig:
    command: str
    d: int
    label_laws: tuple | None
    real_laws: tuple | None
    t_grid: tuple[float, ...]
    reps: int
    depth_cap: int
    seed: int | None
    tolerances: tuple[tuple[str, float], ...]
    output: str

    def model(self) -> ModelSpec:
        if self.label_laws is not None:
            return ModelSpec(self.d, self.label_laws)
        return fpp_transform(self.real_laws)

    def curve(self) -> SpectralCurve:
        tol = dict(self.tolerances)
        return SpectralCurve(
            self.model(),
            perron_tol=tol.get("perron_tol", 1e-12),
            xtol=tol.get("xtol", 1e-10),
        )


# -- law (de)serialisation -------------------------------------------------------


def _parse_label_law(obj, where: str, errors: list[str]) -> LabelLaw | None:
    family = obj.get("family")
    params = obj.get("params", {})
    try:
        if family == "atomic":
            return Atomic(tuple(params["atoms"]), tuple(params["probs"]))
        if family == "log_normal":
            return LogNormal(float(params["m0"]), float(params["sigma"]))
        if family == "log_uniform":
            return LogUniform(float(params["a"]), float(params["b"]))
        if family == "deterministic":
            return Deterministic(float(params["value"]))
        errors.append(f"{where}: unknown label-law family {family!r}")
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        errors.append(f"{where}: {exc}")
    return None


def _parse_real_law(obj, where: str, errors: list[str]) -> RealLaw | None:
    family = obj.get("family")
    params = obj.get("params", {})
    try:
        if family == "normal":
            return Normal(float(params["mean"]), float(params["sd"]))
        if family == "atomic":
            return AtomicReal(tuple(params["atoms"]), tuple(params["probs"]))
        if family == "uniform":
            return UniformReal(float(params["a"]), float(params["b"]))
        if family == "deterministic":
            return DeterministicReal(float(params["value"]))
        errors.append(f"{where}: unknown real-law family {family!r}")
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        errors.append(f"{where}: {exc}")
    return None


def _law_to_json(law) -> dict:
    if isinstance(law, Atomic):
        return {"family": "atomic",
                "params": {"atoms": list(law.atoms), "probs": list(law.probs)}}
    if isinstance(law, LogNormal):
        return {"family": "log_normal", "params": {"m0": law.m0, "sigma": law.sigma}}
    if isinstance(law, LogUniform):
        return {"family": "log_uniform", "params": {"a": law.a, "b": law.b}}
    if isinstance(law, Deterministic):
        return {"family": "deterministic", "params": {"value": law.value}}
    if isinstance(law, Normal):
        return {"family": "normal", "params": {"mean": law.mean, "sd": law.sd}}
    if isinstance(law, AtomicReal):
        return {"family": "atomic",
                "params": {"atoms": list(law.atoms), "probs": list(law.probs)}}
    if isinstance(law, UniformReal):
        return {"family": "uniform", "params": {"a": law.a, "b": law.b}}
    if isinstance(law, DeterministicReal):
        return {"family": "deterministic", "params": {"value": law.value}}
    raise UnsupportedLaw(f"cannot serialise {law!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document.

    Raises :class:`ParseError` for malformed JSON and
    :class:`ValidationError` listing every violated invariant otherwise.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")

    errors: list[str] = []
    command = doc.get("command")
    if command not in COMMANDS:
        errors.append(f"command: must be one of {COMMANDS}, got {command!r}")

    d = doc.get("d")
    if not isinstance(d, int) or d < 2:
        errors.append(f"d: must be an integer >= 2, got {d!r}")
        d = 2

    laws_doc = doc.get("laws")
    real_mode = command in REAL_LAW_COMMANDS
    parse_one = _parse_real_law if real_mode else _parse_label_law
    label_laws = real_laws = None
    if laws_doc is None:
        errors.append("laws: missing")
    elif isinstance(laws_doc, dict):
        one = parse_one(laws_doc, "laws", errors)
        if one is not None:
            matrix = tuple(tuple(one for _ in range(d)) for _ in range(d))
            label_laws, real_laws = (None, matrix) if real_mode else (matrix, None)
    elif isinstance(laws_doc, list):
        if len(laws_doc) != d or any(
            not isinstance(row, list) or len(row) != d for row in laws_doc
        ):
            errors.append(f"laws: matrix shape must be exactly {d}x{d}")
        else:
            matrix = []
            for i, row in enumerate(laws_doc):
                parsed_row = []
                for j, obj in enumerate(row):
                    law = parse_one(obj, f"laws[{i}][{j}]", errors)
                    parsed_row.append(law)
                matrix.append(tuple(parsed_row))
            if not errors:
                matrix = tuple(matrix)
                label_laws, real_laws = (None, matrix) if real_mode else (matrix, None)
    else:
        errors.append("laws: must be a law object or a d x d matrix of them")

    t_grid = doc.get("t_grid", [])
    if not isinstance(t_grid, list) or not all(
        isinstance(t, (int, float)) for t in t_grid
    ):
        errors.append("t_grid: must be a list of numbers")
        t_grid = []
    elif any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        errors.append("t_grid: must be strictly increasing")

    reps = doc.get("reps", 1)
    if not isinstance(reps, int) or reps < 1:
        errors.append(f"reps: must be an integer >= 1, got {reps!r}")
        reps = 1

    depth_cap = doc.get("depth_cap", 1)
    if not isinstance(depth_cap, int) or depth_cap < 1:
        errors.append(f"depth_cap: must be an integer >= 1, got {depth_cap!r}")
        depth_cap = 1

    seed = doc.get("seed")
    if seed is not None and not isinstance(seed, int):
        errors.append(f"seed: must be an integer, got {seed!r}")
        seed = None
    if seed is None and command in STOCHASTIC_COMMANDS:
        errors.append(f"seed: required for command {command!r} (no silent nondeterminism)")

    tolerances = doc.get("tolerances", {})
    if not isinstance(tolerances, dict):
        errors.append("tolerances: must be an object")
        tolerances = {}
    for key, value in tolerances.items():
        if key not in TOLERANCE_KEYS:
            errors.append(f"tolerances: unknown key {key!r} (allowed: {TOLERANCE_KEYS})")
        elif not isinstance(value, (int, float)) or value <= 0:
            errors.append(f"tolerances.{key}: must be a positive number")

    if command in ("simulate", "ld-check", "brw", "fpp") and not t_grid:
        errors.append(f"t_grid: required and nonempty for command {command!r}")

    output = doc.get("output")
    if not isinstance(output, str) or not output:
        errors.append("output: must be a nonempty path string")
        output = "out"

    if errors:
        raise ValidationError("; ".join(errors))
    return RunConfig(
        command=command,
        d=d,
        label_laws=label_laws,
        real_laws=real_laws,
        t_grid=tuple(float(t) for t in t_grid),
        reps=reps,
        depth_cap=depth_cap,
        seed=seed,
        tolerances=tuple(sorted((k, float(v)) for k, v in tolerances.items())),
        output=output,
    )


def emit_config(config: RunConfig) -> str:
    """Canonical JSON text for a config; ``parse_config`` round-trips it."""
    laws = config.label_laws if config.label_laws is not None else config.real_laws
    doc = {
        "d": config.d,
        "laws": [[_law_to_json(law) for law in row] for row in laws],
        "command": config.command,
        "t_grid": list(config.t_grid),
        "reps": config.reps,
        "depth_cap": config.depth_cap,
        "seed": config.seed,
        "output": config.output,
    }
    if config.tolerances:
        doc["tolerances"] = dict(config.tolerances)
    return json.dumps(doc, indent=2, sort_keys=True)


# -- output writers ---------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- command implementations --------------------------------------------------------


def _cmd_analyze(config: RunConfig, out_base: Path, workers: int) -> list[Path]:
    report = build_report(config.curve())
    path = out_base.parent / (out_base.name + "_report.json")
    _write_json(path, report.to_dict())
    return [path]


def _cmd_simulate(config: RunConfig, out_base: Path, workers: int) -> list[Path]:
    model = config.model()
    curve = config.curve()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    header = ["t", "estimator", "estimate", "se", "reps",
              "truncation_depth", "tail_bound", "exact"]
    rows = []
    for res in estimate_EZ(model, config.t_grid, max(config.reps, 2), rng,
                           workers=workers, curve=curve):
        rows.append([res.t, "level_sum", res.ez_estimate, res.se, res.reps,
                     res.truncation_depth, res.tail_bound, res.exact])
    if model.all_supports_at_most_one():
        for t in config.t_grid:
            res = enumerate_Z_mean(model, t, config.depth_cap, config.reps, rng,
                                   curve=curve)
            rows.append([res.t, "tree", res.ez_estimate, res.se, res.reps,
                         res.truncation_depth, res.tail_bound, res.exact])
    path = out_base.parent / (out_base.name + "_counts.csv")
    _write_csv(path, header, rows)
    return [path]


def _cmd_ld_check(config: RunConfig, out_base: Path, workers: int) -> list[Path]:
    model = config.model()
    curve = config.curve()
    rf = RateFunction(curve)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    n = config.depth_cap
    results = ld_sweep(model, config.t_grid, n, rng, max_plain_reps=config.reps,
                       curve=curve)
    header = ["a", "n", "empirical_rate", "se", "rate_function",
              "hits", "reps", "method"]
    rows = []
    for res in results:
        exact, _ = rf.rate(res.a)
        rows.append([res.a, res.n, res.rate, res.se, exact, res.hits, res.reps,
                     "tilted" if res.tilted else "plain"])
    path = out_base.parent / (out_base.name + "_ldcheck.csv")
    _write_csv(path, header, rows)
    return [path]


def _cmd_brw(config: RunConfig, out_base: Path, workers: int) -> list[Path]:
    model = config.model()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    snapshots = simulate_brw(model, config.depth_cap, config.reps, rng,
                             t_grid=config.t_grid)
    speed = brw_speed(config.curve())
    header = ["generation", "reps", "min_mean", "min_pooled", "min_mean_over_n",
              "q10", "q50", "q90", "x0"]
    header += [f"count_le_{t:g}" for t in config.t_grid]
    rows = []
    for snap in snapshots:
        row = [snap.generation, snap.reps, snap.min_mean, snap.min_pooled,
               snap.min_mean / snap.generation, snap.q10, snap.q50, snap.q90,
               speed.x0]
        row += [snap.counts_le[t] for t in config.t_grid]
        rows.append(row)
    path = out_base.parent / (out_base.name + "_brw.csv")
    _write_csv(path, header, rows)
    return [path]


def _cmd_fpp(config: RunConfig, out_base: Path, workers: int) -> list[Path]:
    paths = _cmd_analyze(config, out_base, workers)
    paths += _cmd_simulate(config, out_base, workers)
    return paths


def _close(a, b, tol) -> bool:
    return abs(a - b) <= tol


def _verify_checks(config: RunConfig) -> list[tuple[str, bool, str]]:
    """The cross-module property battery behind the ``verify`` command."""
    model = config.model()
    curve = config.curve()
    checks: list[tuple[str, bool, str]] = []

    report = check_conditions(model)
    checks.append(("admissibility", report.all_admissible,
                   f"degenerate={report.degenerate}"))

    dom = model.shared_domain()
    grid = [s for s in np.arange(0.0, 3.01, 0.25) if dom.contains(s)]
    res_ok = True
    detail = ""
    for s in grid:
        triple = curve.perron_at(s)
        if triple.residual > curve.perron_tol:
            res_ok = False
            detail = f"residual {triple.residual:.2e} at s={s}"
            break
    checks.append(("perron_residuals", res_ok, detail))

    checks.append(("rho_at_zero", curve.rho(0.0) == float(model.d), ""))

    cgf_vals = [curve.cgf(s) for s in grid]
    convex = all(
        cgf_vals[k + 1] <= 0.5 * (cgf_vals[k] + cgf_vals[k + 2]) + 1e-10
        for k in range(len(cgf_vals) - 2)
    )
    checks.append(("cgf_convexity", convex, ""))

    fd_ok = True
    detail = ""
    h = 1e-6
    for s in grid:
        if not dom.contains_interior(s):
            continue
        analytic = curve.rho_prime(s)
        fd = (curve.rho(s + h) - curve.rho(s - h)) / (2 * h)
        # rho' vanishes at the argmin, so scale relative error by rho itself
        scale = max(abs(analytic), abs(fd), curve.rho(s))
        if abs(analytic - fd) / scale > 1e-6:
            fd_ok = False
            detail = f"s={s}: analytic {analytic:.9g} vs fd {fd:.9g}"
            break
    checks.append(("rho_prime_vs_fd", fd_ok, detail))

    rf = RateFunction(curve)
    mu = rf.mu
    at_minus_mu, _ = rf.rate(-mu)
    checks.append(("rate_zero_at_minus_mu", abs(at_minus_mu) <= 1e-8, f"mu={mu:.6g}"))
    zs = np.linspace(-mu - 1.0, mu + 1.0, 9)
    rate_vals = [rf.rate(float(z))[0] for z in zs]
    finite_vals = [v for v in rate_vals if math.isfinite(v)]
    rate_ok = all(v >= 0.0 for v in finite_vals)
    zero_region = all(
        rf.rate(float(z))[0] == 0.0 for z in zs if z <= rf.drift
    )
    checks.append(("rate_nonnegative", rate_ok, ""))
    checks.append(("rate_zero_region", zero_region, ""))

    lam = curve.min_perron_root().value
    rate0, _ = rf.rate(0.0)
    log_d = math.log(model.d)
    equiv = (lam < 1.0) == (rate0 > log_d)
    checks.append(("finiteness_equivalence", equiv,
                   f"lambda={lam:.6g}, rate(0)={rate0:.6g}, log d={log_d:.6g}"))

    regime = classify(curve)
    if regime is not Regime.FINITE or mu <= 0.0:
        raise AssumptionViolation(
            f"verify needs the finite regime with positive drift: "
            f"regime={regime.value}, lambda={lam:.6g}, mu={mu:.6g}"
        )
    rep = build_report(curve, include_brw=True)
    checks.append(("cross_check", rep.cross_residual <= 1e-6,
                   f"|M - s1| = {rep.cross_residual:.3e}"))
    checks.append(("u_star_interior", 0.0 < rep.u_star < mu,
                   f"u*={rep.u_star:.6g}, mu={mu:.6g}"))
    _, s0 = rf.rate(-rep.u_star)
    checks.append(("maximiser_identity", _close(rep.M_variational, s0, 1e-6),
                   f"f(u*)={rep.M_variational:.9g}, s0(-u*)={s0:.9g}"))
    s1 = rep.s1_spectral
    pattern = (
        curve.cgf(0.5 * s1) + log_d > 0.0
        and curve.cgf(s1 + 0.05 * (curve.min_perron_root().s_argmin - s1)) + log_d < 0.0
    )
    checks.append(("root_structure", pattern, f"s1={s1:.6g}"))
    speed = brw_speed(curve)
    checks.append(("brw_speed_residual",
                   speed.residual <= 1e-8 or bool(speed.warnings),
                   f"x0={speed.x0:.6g}, residual={speed.residual:.2e}"))

    decay_ok = True
    detail = ""
    s_probe = 0.5
    target = curve.log_rho(s_probe) - log_d
    errs = []
    for n in (10, 20, 40):
        ln = level_log_moment(model, s_probe, n) / n
        errs.append(abs(ln - target))
    if not (errs[0] >= errs[1] - 1e-12 and errs[1] >= errs[2] - 1e-12):
        decay_ok = False
        detail = f"errors {errs}"
    checks.append(("level_moment_decay", decay_ok, detail))

    if config.seed is not None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
        sampler = PathSampler(model, 1, rng)
        n = 8
        sums = sampler.sample_sums(50_000, n)
        emp = np.exp(s_probe * sums[:, -1])
        mean = float(emp.mean())
        se = float(emp.std(ddof=1) / math.sqrt(len(emp)))
        exact = math.exp(level_log_moment(model, s_probe, n))
        checks.append(("level_moment_vs_mc", abs(mean - exact) <= 4 * se + 1e-12,
                       f"mc={mean:.6g}, exact={exact:.6g}, se={se:.2e}"))
    return checks


def _cmd_verify(config: RunConfig, out_base: Path, workers: int) -> list[Path]:
    checks = _verify_checks(config)
    header = ["check", "status", "detail"]
    rows = [[name, "pass" if ok else "FAIL", detail] for name, ok, detail in checks]
    path = out_base.parent / (out_base.name + "_verify.csv")
    _write_csv(path, header, rows)
    for name, ok, detail in checks:
        print(f"[{'pass' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    if not all(ok for _, ok, _ in checks):
        raise _VerifyFailure()
    return [path]


class _VerifyFailure(TreeCascadeError):
    pass


_DISPATCH = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "ld-check": _cmd_ld_check,
    "brw": _cmd_brw,
    "fpp": _cmd_fpp,
    "verify": _cmd_verify,
}

_EXIT_BY_ERROR = (
    (ParseError, EXIT_PARSE),
    ((ValidationError, DomainError, NotLattice, UnsupportedLaw, NonPositiveMatrix),
     EXIT_VALIDATION),
    (AssumptionViolation, EXIT_ASSUMPTION),
    ((NoConvergence, BracketingFailure, InsufficientHits), EXIT_CONVERGENCE),
    (MemoryBudgetExceeded, EXIT_BUDGET),
    (_VerifyFailure, EXIT_CHECK_FAILED),
)


def run(config: RunConfig, workers: int = 1) -> int:
    """Execute one parsed config; returns the process exit code."""
    try:
        out_base = Path(config.output)
        paths = _DISPATCH[config.command](config, out_base, workers)
    except TreeCascadeError as exc:
        for err_types, code in _EXIT_BY_ERROR:
            if isinstance(exc, err_types):
                if not isinstance(exc, _VerifyFailure):
                    print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="treecascade",
        description="Growth-exponent analysis and simulation of multiplicative "
        "cascades on coloured d-ary trees.",
    )
    parser.add_argument("config", help="path to a JSON config document")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes for replica reduction (default 1)")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error (ParseError): cannot read config: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        config = parse_config(text)
    except TreeCascadeError as exc:
        code = EXIT_PARSE if isinstance(exc, ParseError) else EXIT_VALIDATION
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return code
    return run(config, workers=max(1, args.workers))


if __name__ == "__main__":
    sys.exit(main())
