import math

import pytest

from treecascade import (
    AssumptionViolation,
    Atomic,
    AtomicReal,
    Deterministic,
    DeterministicReal,
    LogNormal,
    LogUniform,
    ModelSpec,
    Normal,
    RateFunction,
    Regime,
    SpectralCurve,
    UniformReal,
    UnsupportedLaw,
    brw_speed,
    build_report,
    classify,
    fpp_transform,
    growth_exponent_spectral,
    growth_exponent_variational,
)
from treecascade.spectral import S_SEARCH_MAX

from conftest import GAUSS_S1, GAUSS_USTAR, GAUSS_X0, GOLDEN_S1, LN2


class TestClassify:
    def test_finite(self, gauss_model):
        assert classify(gauss_model) is Regime.FINITE

    def test_infinite(self):
        assert classify(ModelSpec.iid(2, Deterministic(2.0))) is Regime.INFINITE

    def test_critical(self):
        model = ModelSpec.iid(2, LogNormal(-math.sqrt(2 * LN2), 1.0))
        assert classify(model) is Regime.CRITICAL


class TestVariational:
    def test_gauss_closed_form(self, gauss_model):
        m, u_star = growth_exponent_variational(gauss_model)
        assert m == pytest.approx(GAUSS_S1, abs=1e-8)
        assert u_star == pytest.approx(GAUSS_USTAR, abs=1e-6)

    def test_endpoint_value_below_maximum(self, gauss_model):
        # f(mu) = log d / mu is attainable but not the max for smooth models
        m, _ = growth_exponent_variational(gauss_model)
        assert LN2 / 1.5 == pytest.approx(0.462098, abs=1e-6)
        assert m > LN2 / 1.5

    def test_atomic_matches_spectral_root(self, atomic_model):
        m, _ = growth_exponent_variational(atomic_model)
        assert m == pytest.approx(GOLDEN_S1, abs=1e-8)

    def test_requires_finite_regime(self):
        with pytest.raises(AssumptionViolation, match="A1"):
            growth_exponent_variational(ModelSpec.iid(2, Deterministic(2.0)))
        with pytest.raises(AssumptionViolation):
            growth_exponent_variational(
                ModelSpec.iid(2, LogNormal(-math.sqrt(2 * LN2), 1.0))
            )


class TestSpectralRoot:
    def test_golden_ratio_atomic(self, atomic_model):
        assert growth_exponent_spectral(atomic_model) == pytest.approx(
            GOLDEN_S1, abs=1e-8
        )

    def test_gauss(self, gauss_model):
        assert growth_exponent_spectral(gauss_model) == pytest.approx(
            GAUSS_S1, abs=1e-8
        )

    def test_deterministic_half(self):
        model = ModelSpec.iid(2, Deterministic(0.5))
        assert growth_exponent_spectral(model) == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_variational_hits_endpoint(self):
        # rate jumps to +inf off the endpoint, where f(mu) = log d / mu = 1
        model = ModelSpec.iid(2, Deterministic(0.5))
        m, u_star = growth_exponent_variational(model)
        assert m == pytest.approx(1.0, abs=1e-9)
        assert u_star == pytest.approx(LN2, abs=1e-12)

    def test_requires_subunit_infimum(self):
        with pytest.raises(AssumptionViolation):
            growth_exponent_spectral(ModelSpec.iid(2, Deterministic(2.0)))


class TestCrossCheck:
    def test_battery(self, battery):
        for name, model in battery.items():
            curve = SpectralCurve(model)
            m, u_star = growth_exponent_variational(curve)
            s1 = growth_exponent_spectral(curve)
            assert abs(m - s1) <= 1e-6, name
            mu = RateFunction(curve).mu
            assert 0.0 < u_star < mu, name

    def test_maximiser_identity(self, battery):
        # at the maximiser, f(u*) equals the tilt exponent s0(-u*)
        for name, model in battery.items():
            curve = SpectralCurve(model)
            m, u_star = growth_exponent_variational(curve)
            _, s0 = RateFunction(curve).rate(-u_star)
            assert abs(m - s0) <= 1e-6, name

    def test_root_structure(self, battery):
        # cgf + log d is positive before the smaller root, negative just after
        for name, model in battery.items():
            curve = SpectralCurve(model)
            s1 = growth_exponent_spectral(curve)
            log_d = math.log(model.d)
            for frac in (0.25, 0.5, 0.9):
                assert curve.cgf(frac * s1) + log_d > 0.0, name
            s_argmin = curve.min_perron_root().s_argmin
            just_above = s1 + 0.05 * (s_argmin - s1)
            assert curve.cgf(just_above) + log_d < 0.0, name


class TestBrwSpeed:
    def test_gauss_jumps(self, gauss_model):
        speed = brw_speed(gauss_model)
        assert speed.x0 == pytest.approx(GAUSS_X0, abs=1e-8)
        assert speed.residual <= 1e-9
        assert not speed.warnings

    def test_centred_gauss_jumps(self):
        model = ModelSpec.iid(2, LogNormal(0.0, 1.0))
        speed = brw_speed(model)
        assert speed.x0 == pytest.approx(-math.sqrt(2 * LN2), abs=1e-8)

    def test_deterministic_jumps(self):
        # the defining equation has no root for point-mass jumps: the infimum
        # jumps from 0 to d at x = c; with the s-search capped the bisection
        # lands log(d)/cap below c and a warning replaces the residual bound
        c = 0.7
        model = ModelSpec.iid(2, Deterministic(math.exp(-c)))
        speed = brw_speed(model)
        assert speed.x0 == pytest.approx(c - LN2 / S_SEARCH_MAX, abs=1e-6)
        assert speed.warnings

    def test_equation_residual_independent(self, battery):
        # re-evaluate inf_s e^{s x0} rho(s) by a two-stage grid scan over the
        # whole search range, independent of the solver path
        import numpy as np

        for name, model in battery.items():
            curve = SpectralCurve(model)
            speed = brw_speed(curve)
            obj = lambda s: s * speed.x0 + curve.log_rho(float(s))
            coarse = np.linspace(0.0, S_SEARCH_MAX, 1500)
            k = int(np.argmin([obj(s) for s in coarse]))
            lo = coarse[max(k - 1, 0)]
            hi = coarse[min(k + 1, len(coarse) - 1)]
            fine = np.linspace(lo, hi, 2000)
            best = min(obj(s) for s in fine)
            assert math.exp(best) == pytest.approx(1.0, abs=1e-6), name


class TestScalingCovariance:
    def test_gauss_family(self):
        # multiplying labels by exp(c) shifts the log-law location by c
        base = ModelSpec.iid(2, LogNormal(-1.5, 1.0))
        shifted = ModelSpec.iid(2, LogNormal(-1.2, 1.0))
        mu_base = RateFunction(SpectralCurve(base)).mu
        mu_shift = RateFunction(SpectralCurve(shifted)).mu
        assert mu_base - mu_shift == pytest.approx(0.3, abs=1e-10)
        s1 = growth_exponent_spectral(shifted)
        assert s1 == pytest.approx(1.2 - math.sqrt(1.44 - 2 * LN2), abs=1e-8)


class TestFppTransform:
    def test_normal_to_lognormal(self):
        model = fpp_transform([[Normal(1.5, 1.0)] * 2] * 2)
        assert model.laws[0][0] == LogNormal(-1.5, 1.0)

    def test_atomic_log_atoms(self):
        tau = AtomicReal((math.log(4), math.log(2)), (0.5, 0.5))
        model = fpp_transform([[tau] * 2] * 2)
        law = model.laws[1][0]
        assert isinstance(law, Atomic)
        assert law.atoms == pytest.approx((0.25, 0.5))

    def test_zero_passage_time(self):
        model = fpp_transform([[DeterministicReal(0.0)] * 2] * 2)
        assert model.laws[0][1] == Deterministic(1.0)

    def test_uniform_flips_endpoints(self):
        model = fpp_transform([[UniformReal(-0.5, 2.0)] * 2] * 2)
        assert model.laws[0][0] == LogUniform(-2.0, 0.5)

    def test_rejects_unknown(self):
        with pytest.raises(UnsupportedLaw):
            fpp_transform([[object()] * 2] * 2)

    def test_fpp_reduction_matches_direct_analysis(self):
        # R(t) analysis of Normal passage times == Z analysis of the log-normal
        model = fpp_transform([[Normal(1.5, 1.0)] * 2] * 2)
        assert growth_exponent_spectral(model) == pytest.approx(GAUSS_S1, abs=1e-8)


class TestReport:
    def test_finite_report(self, gauss_model):
        rep = build_report(gauss_model)
        assert rep.regime is Regime.FINITE
        assert rep.lambda_ == pytest.approx(2 * math.exp(-1.125), rel=1e-9)
        assert rep.mu == pytest.approx(1.5, abs=1e-10)
        assert rep.M_variational == pytest.approx(GAUSS_S1, abs=1e-8)
        assert rep.s1_spectral == pytest.approx(GAUSS_S1, abs=1e-8)
        assert rep.cross_residual <= 1e-6
        assert rep.x0_brw == pytest.approx(GAUSS_X0, abs=1e-8)
        assert rep.warnings == ()
        payload = rep.to_dict()
        assert payload["regime"] == "finite"
        assert payload["lambda"] == rep.lambda_

    def test_infinite_report_has_no_exponent(self):
        rep = build_report(ModelSpec.iid(2, Deterministic(2.0)))
        assert rep.regime is Regime.INFINITE
        assert rep.M_variational is None and rep.s1_spectral is None
        assert any("A1" in w for w in rep.warnings)
        assert any("nonstrict-convexity" in w for w in rep.warnings)

    def test_boundary_flag_warning(self, atomic_model):
        rep = build_report(atomic_model)
        assert any("still decreasing" in w for w in rep.warnings)
        assert rep.cross_residual <= 1e-6
