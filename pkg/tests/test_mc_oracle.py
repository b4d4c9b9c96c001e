import math

import numpy as np
import pytest

import config
from error_handling import DomainError, OracleError, PreconditionError
from gaussian_rates import AuxParams, ChannelParams
from gaussian_scheme import GaussianScheme, build_gaussian_scheme
from mc_oracle import (
    DEGRADEDNESS_CHECKS,
    ORACLE_CATALOGUE,
    OracleReport,
    conditional_covariance,
    degradedness_checks,
    degradedness_stat,
    mi_logdet,
    mi_plugin,
    oracle_sweep,
    plugin_spot_checks,
    verify_rate_expr,
)

STRONG_RELAY = ChannelParams(P=10.0, P1=5.0, P2=5.0, N1=1.0, N2=4.0)
WEAK_RELAY = ChannelParams(P=10.0, P1=5.0, P2=5.0, N1=4.0, N2=1.0)


def additive_noise_scheme():
    # Y = X + Z with unit variances
    return GaussianScheme.from_covariance(("X", "Y"), [[1.0, 1.0], [1.0, 2.0]])


class TestLogDet:

    def test_additive_noise_channel(self):
        assert mi_logdet(additive_noise_scheme(), "X", "Y") == pytest.approx(0.5, abs=1e-12)

    def test_conditioning_on_the_output(self):
        assert mi_logdet(additive_noise_scheme(), "X", "Y", "Y") == 0.0

    def test_deterministic_relation_is_infinite(self):
        with pytest.raises(OracleError):
            mi_logdet(additive_noise_scheme(), "X", "X")

    def test_function_of_conditioning_is_zero(self):
        scheme = GaussianScheme.from_covariance(("X", "W", "Y"), [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 2.0]])
        assert mi_logdet(scheme, "W", "Y", "X") == 0.0

    def test_schur_complement(self):
        cov = np.array([[2.0, 1.0], [1.0, 1.0]])
        assert conditional_covariance(cov, [0], [1])[0, 0] == pytest.approx(1.0)
        assert conditional_covariance(cov, [0], [])[0, 0] == pytest.approx(2.0)

    def test_unknown_label(self):
        with pytest.raises(DomainError):
            mi_logdet(additive_noise_scheme(), "X", "Q")


class TestCatalogue:

    @pytest.mark.parametrize("which", sorted(ORACLE_CATALOGUE))
    def test_closed_form_matches_logdet(self, which):
        params = WEAK_RELAY if ORACLE_CATALOGUE[which].weak_relay else STRONG_RELAY
        aux = AuxParams(alpha=0.4, beta_fresh=0.6, gamma=0.3, eta=0.5)
        report = verify_rate_expr(params, aux, which)
        assert report.difference < config.ORACLE_TOL
        assert report.passed

    @pytest.mark.parametrize("which", ["thm14-r1", "eq119-a", "eq20-r2"])
    def test_unpowered_relay_link(self, which):
        params = WEAK_RELAY if ORACLE_CATALOGUE[which].weak_relay else STRONG_RELAY
        report = verify_rate_expr(params, AuxParams(alpha=0.4, beta_fresh=0.6, eta=0.0), which)
        assert report.difference < config.ORACLE_TOL

    def test_unknown_formula(self):
        with pytest.raises(DomainError):
            verify_rate_expr(STRONG_RELAY, AuxParams(), "thm99")

    def test_sweep_is_deterministic_and_passes(self):
        first = oracle_sweep(5, seed=3)
        second = oracle_sweep(5, seed=3)
        assert len(first) == 5 * len(ORACLE_CATALOGUE)
        assert all(r.passed for r in first)
        assert [r.logdet for r in first] == [r.logdet for r in second]

    def test_report_serialises(self):
        report = verify_rate_expr(STRONG_RELAY, AuxParams(alpha=0.5, beta_fresh=0.5), "thm4-r1")
        data = report.to_dict()
        assert data["formula"] == "thm4-r1"
        assert data["passed"] is True
        assert data["params"]["P1"] == 5.0


class TestPlugin:

    def test_requires_enough_samples(self):
        with pytest.raises(PreconditionError):
            mi_plugin(additive_noise_scheme(), "X", "Y", n=config.MIN_PLUGIN_SAMPLES - 1)

    def test_estimate_close_to_exact(self):
        report = mi_plugin(additive_noise_scheme(), "X", "Y", n=50_000, seed=5)
        assert report.logdet == pytest.approx(0.5)
        assert report.plugin == pytest.approx(0.5, abs=0.02)
        assert report.standard_error > 0.0

    def test_same_seed_same_estimate(self):
        scheme = build_gaussian_scheme(STRONG_RELAY, AuxParams(alpha=0.3, beta_fresh=0.6), "dawgn-partial")
        first = mi_plugin(scheme, "U", "Y1", "X1", n=5000, seed=9, stream=2)
        second = mi_plugin(scheme, "U", "Y1", "X1", n=5000, seed=9, stream=2)
        assert first.plugin == second.plugin
        assert first.standard_error == second.standard_error

    def test_verify_with_samples(self):
        report = verify_rate_expr(STRONG_RELAY, AuxParams(alpha=0.3, beta_fresh=0.6), "thm4-dec",
                                  n_samples=20_000, seed=1)
        assert report.samples == 20_000
        assert report.closed_form is not None
        assert report.plugin == pytest.approx(report.logdet, abs=0.05)

    def test_spot_checks_cover_catalogue_in_order(self):
        reports = plugin_spot_checks(3, n_samples=2000, seed=4)
        assert [r.formula for r in reports] == sorted(ORACLE_CATALOGUE)[:3]
        assert all(r.difference < config.ORACLE_TOL for r in reports)

    def test_spot_checks_agree_with_logdet_at_full_sample_size(self):
        reports = plugin_spot_checks(config.PLUGIN_SPOT_CHECKS, n_samples=200_000, seed=config.DEFAULT_SEED)
        assert len(reports) == config.PLUGIN_SPOT_CHECKS
        for report in reports:
            assert report.samples == 200_000
            assert report.standard_error > 0.0
            assert abs(report.plugin - report.logdet) <= 4.0 * report.standard_error + config.IDENTITY_TOL
            assert report.passed

    def test_report_rejects_negative_error(self):
        with pytest.raises(DomainError):
            OracleReport("x", 0.0, 0.0, 0.0, -1.0)


class TestDegradedness:

    def test_transform_makes_channel_degraded(self):
        reports = degradedness_checks(STRONG_RELAY, n=20_000, seed=2)
        assert {r.name for r in reports} == set(DEGRADEDNESS_CHECKS)
        for report in reports:
            assert abs(report.analytic) < config.IDENTITY_TOL
            assert report.threshold == pytest.approx(4.0 / math.sqrt(20_000))
            assert report.passed

    def test_missing_conditioning_is_detected(self):
        scheme = build_gaussian_scheme(STRONG_RELAY, AuxParams(alpha=0.5, beta_fresh=0.5), "awgn-partial-feedback")
        report = degradedness_stat(scheme, "Y2", "X", ("X1",), n=0)
        assert abs(report.analytic) > 0.1
        assert report.sampled is None
        assert not report.passed

    @pytest.mark.parametrize("a", [-2.0, -0.5, 0.7, 3.0])
    def test_degraded_for_every_self_interference(self, a):
        rng = np.random.default_rng(11)
        for _ in range(20):
            low, high = np.sort(rng.uniform(0.1, 10.0, size=2))
            params = ChannelParams(P=rng.uniform(0.1, 20.0), P1=rng.uniform(0.1, 20.0),
                                   P2=rng.uniform(0.1, 20.0), N1=low, N2=high + 0.05)
            for report in degradedness_checks(params, n=0, a=a):
                assert abs(report.analytic) < config.IDENTITY_TOL

    @pytest.mark.parametrize("a", [-2.0, 0.7])
    def test_sampled_partial_correlation_vanishes(self, a):
        for report in degradedness_checks(STRONG_RELAY, n=200_000, seed=6, a=a):
            assert abs(report.sampled) < report.threshold
            assert report.passed
