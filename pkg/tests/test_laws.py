import math

import numpy as np
import pytest

from treecascade import (
    Atomic,
    AtomicReal,
    Deterministic,
    DeterministicReal,
    LogNormal,
    LogUniform,
    ModelSpec,
    Normal,
    UniformReal,
    ValidationError,
    check_conditions,
)

from conftest import rng

ALL_LAWS = [
    Atomic((0.25, 0.5), (0.5, 0.5)),
    Atomic((0.1, 0.7, 1.3), (0.2, 0.5, 0.3)),
    LogNormal(-1.5, 1.0),
    LogNormal(0.4, 0.3),
    LogUniform(-3.0, 0.5),
    LogUniform(-0.01, 0.01),
    Deterministic(0.5),
    Deterministic(math.e),
]


class TestConstruction:
    def test_atomic_rejects_nonpositive_atom(self):
        with pytest.raises(ValidationError):
            Atomic((0.0, 0.5), (0.5, 0.5))
        with pytest.raises(ValidationError):
            Atomic((-0.25, 0.5), (0.5, 0.5))

    def test_atomic_prob_normalisation(self):
        # slightly-off sums are normalised, badly-off rejected
        law = Atomic((0.25, 0.5), (0.5, 0.5 + 5e-10))
        assert abs(math.fsum(law.probs) - 1.0) <= 1e-12
        with pytest.raises(ValidationError):
            Atomic((0.25, 0.5), (0.5, 0.6))

    def test_atomic_shape_mismatch(self):
        with pytest.raises(ValidationError):
            Atomic((0.25,), (0.5, 0.5))

    def test_lognormal_sigma_positive(self):
        with pytest.raises(ValidationError):
            LogNormal(0.0, 0.0)
        with pytest.raises(ValidationError):
            LogNormal(0.0, -1.0)

    def test_loguniform_ordering(self):
        with pytest.raises(ValidationError):
            LogUniform(1.0, 1.0)

    def test_deterministic_positive(self):
        with pytest.raises(ValidationError):
            Deterministic(0.0)

    def test_real_laws_validate(self):
        with pytest.raises(ValidationError):
            Normal(0.0, 0.0)
        with pytest.raises(ValidationError):
            UniformReal(2.0, 2.0)
        with pytest.raises(ValidationError):
            AtomicReal((1.0,), (0.7,))
        Normal(-1.0, 2.0)
        AtomicReal((-1.0, 2.0), (0.5, 0.5))
        DeterministicReal(-3.0)

    def test_model_spec_shape(self):
        law = Deterministic(0.5)
        with pytest.raises(ValidationError):
            ModelSpec(2, ((law,),))
        with pytest.raises(ValidationError):
            ModelSpec(1, ((law,),))
        with pytest.raises(ValidationError):
            ModelSpec(2, ((law, law), (law, law, law)))


class TestMoments:
    def test_spec_values(self):
        assert Deterministic(0.5).moment(1.0) == pytest.approx(0.5, abs=1e-15)
        assert Atomic((0.25, 0.5), (0.5, 0.5)).moment(1.0) == pytest.approx(0.375, abs=1e-15)
        assert LogNormal(-1.5, 1.0).moment(2.0) == pytest.approx(math.exp(-1.0), rel=1e-14)
        assert LogUniform(0.0, 1.0).moment(0.0) == 1.0
        assert LogUniform(0.0, 1.0).moment(1.0) == pytest.approx(math.e - 1.0, rel=1e-13)

    @pytest.mark.parametrize("law", ALL_LAWS, ids=str)
    def test_moment_at_zero_is_one_exactly(self, law):
        assert law.moment(0.0) == 1.0

    def test_logweighted_spec_values(self):
        assert Deterministic(math.e).moment_logweighted(0.0) == pytest.approx(1.0, abs=1e-14)
        got = Atomic((0.25, 0.5), (0.5, 0.5)).moment_logweighted(0.0)
        assert got == pytest.approx(-1.5 * math.log(2), abs=1e-14)
        assert LogNormal(-1.5, 1.0).moment_logweighted(0.0) == pytest.approx(-1.5, abs=1e-14)

    @pytest.mark.parametrize("law", ALL_LAWS, ids=str)
    @pytest.mark.parametrize("s", [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    def test_logweighted_matches_finite_difference(self, law, s):
        h = 1e-4
        fd = (law.moment(s + h) - law.moment(s - h)) / (2 * h)
        analytic = law.moment_logweighted(s)
        scale = max(abs(analytic), abs(fd), law.moment(s))
        assert abs(analytic - fd) / scale < 1e-6

    @pytest.mark.parametrize("law", ALL_LAWS, ids=str)
    def test_log_moment_convex(self, law):
        grid = np.linspace(-2.0, 3.0, 21)
        vals = [law.log_moment(s) for s in grid]
        for k in range(len(grid) - 2):
            assert vals[k + 1] <= 0.5 * (vals[k] + vals[k + 2]) + 1e-10

    def test_loguniform_stable_near_zero(self):
        # naive evaluation cancels catastrophically near 0; check against the
        # Taylor series of E[exp(sU)], U ~ Uniform(-3, 0.5)
        a, b = -3.0, 0.5
        m1 = (a + b) / 2
        m2 = (b**3 - a**3) / (3 * (b - a))
        m3 = (b**4 - a**4) / (4 * (b - a))
        law = LogUniform(a, b)
        for s in (1e-12, -1e-12, 1e-7, -1e-7):
            taylor = 1.0 + s * m1 + s * s * m2 / 2 + s**3 * m3 / 6
            assert law.moment(s) == pytest.approx(taylor, rel=1e-12)

    def test_domains_are_full_line(self):
        for law in ALL_LAWS:
            dom = law.domain()
            assert dom.lower == -math.inf and dom.upper == math.inf
            assert dom.covers_unit_interval() and dom.zero_in_interior()


class TestSampling:
    @pytest.mark.parametrize(
        "law,mean_log,sd_log",
        [
            (Atomic((0.25, 0.5), (0.5, 0.5)), -1.5 * math.log(2), 0.5 * math.log(2)),
            (LogNormal(-1.5, 1.0), -1.5, 1.0),
            (LogUniform(-3.0, 0.5), -1.25, 3.5 / math.sqrt(12)),
        ],
        ids=["atomic", "lognormal", "loguniform"],
    )
    def test_mean_log_clt_band(self, law, mean_log, sd_log):
        n = 1_000_000
        logs = np.log(law.sample_array(rng(101), n))
        se = sd_log / math.sqrt(n)
        assert abs(logs.mean() - mean_log) < 4 * se

    @pytest.mark.parametrize("law", ALL_LAWS, ids=str)
    @pytest.mark.parametrize("s", [0.5, 1.0])
    def test_empirical_moment_band(self, law, s):
        n = 1_000_000
        x = law.sample_array(rng(202), n) ** s
        se = x.std(ddof=1) / math.sqrt(n)
        assert abs(x.mean() - law.moment(s)) <= 4 * se + 1e-12

    def test_deterministic_sample(self):
        assert Deterministic(0.5).sample(rng(1)) == 0.5

    def test_reproducible_given_stream(self):
        law = LogNormal(-1.5, 1.0)
        a = law.sample_array(rng(7), 100)
        b = law.sample_array(rng(7), 100)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("law", ALL_LAWS, ids=str)
    def test_tilted_sampling_matches_tilted_mean(self, law):
        # E_tilted[log xi] is the log-derivative of the moment at the tilt
        s = 0.7
        n = 200_000
        logs = np.log(law.tilted_sample_array(s, rng(303), n))
        se = logs.std(ddof=1) / math.sqrt(n) + 1e-12
        assert abs(logs.mean() - law.moment_logderiv(s)) < 4 * se


class TestAdmissibility:
    def test_all_deterministic_equal_is_degenerate(self):
        report = check_conditions(ModelSpec.iid(2, Deterministic(2.0)))
        assert report.degenerate
        assert report.all_admissible  # moment conditions still hold

    def test_all_deterministic_unequal_not_degenerate(self):
        model = ModelSpec(
            2,
            (
                (Deterministic(0.5), Deterministic(0.25)),
                (Deterministic(0.25), Deterministic(0.5)),
            ),
        )
        report = check_conditions(model)
        assert not report.degenerate
        assert report.warnings  # still flags the all-deterministic structure

    def test_lognormal_model_all_pass(self, gauss_model):
        report = check_conditions(gauss_model)
        assert report.all_admissible and report.smooth_c2 and not report.degenerate
        assert len(report.entries) == 4
        for entry in report.entries:
            assert entry.admissible

    def test_mixed_model_entries(self, mixed3_model):
        report = check_conditions(mixed3_model)
        assert report.all_admissible
        degenerate_entries = [e for e in report.entries if e.degenerate_law]
        assert len(degenerate_entries) == 2  # the two point masses

    def test_support_certification(self, atomic_model, gauss_model):
        assert atomic_model.all_supports_at_most_one()
        assert not gauss_model.all_supports_at_most_one()
        assert ModelSpec.iid(2, LogUniform(-2.0, 0.0)).all_supports_at_most_one()
        assert not ModelSpec.iid(2, LogUniform(-2.0, 0.1)).all_supports_at_most_one()
