import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st

from error_handling import DomainError
from gaussian_rates import AuxParams, ChannelParams
from gaussian_scheme import SCHEME_FAMILIES, GaussianScheme, build_gaussian_scheme, stream_rng


def covariance(scheme, a, b):
    return float(scheme.covariance[scheme.index(a)[0], scheme.index(b)[0]])


class TestBuildScheme:

    def setup_method(self):
        self.params = ChannelParams(P=10.0, P1=5.0, P2=5.0, N1=1.0, N2=4.0)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_source_power_is_exact(self, alpha, beta):
        scheme = build_gaussian_scheme(self.params, AuxParams(alpha=alpha, beta_fresh=beta), "awgn-partial-inner")
        assert covariance(scheme, "X", "X") == pytest.approx(self.params.P, rel=1e-12)
        cloud = (1.0 - alpha) * self.params.P
        expected = math.sqrt((1.0 - beta) * cloud * self.params.P1)
        assert covariance(scheme, "X", "X1") == pytest.approx(expected, abs=1e-12)

    def test_transformed_noises_are_uncorrelated(self):
        scheme = build_gaussian_scheme(self.params, AuxParams(alpha=0.3, beta_fresh=0.5), "awgn-partial-feedback")
        assert covariance(scheme, "Zhat", "Zhat1") == pytest.approx(0.0, abs=1e-15)
        assert covariance(scheme, "Zhat1", "Zhat1") == pytest.approx(0.8)

    def test_degraded_noise_structure(self):
        scheme = build_gaussian_scheme(self.params, AuxParams(alpha=0.3, beta_fresh=0.5), "dawgn-partial")
        assert covariance(scheme, "Z2", "Z2") == pytest.approx(self.params.N2)
        assert covariance(scheme, "Z1", "Z2") == pytest.approx(self.params.N1)

    def test_silent_relay_drops_coherent_part(self):
        params = self.params.with_powers(P1=0.0)
        scheme = build_gaussian_scheme(params, AuxParams(alpha=0.4, beta_fresh=0.5), "dawgn-partial")
        assert covariance(scheme, "X", "X") == pytest.approx(0.4 * 10.0 + 0.5 * 6.0)
        assert covariance(scheme, "X", "X1") == 0.0

    def test_full_scheme_has_compressed_observation(self):
        aux = AuxParams(alpha=0.5, beta_fresh=0.5, eta=0.5)
        scheme = build_gaussian_scheme(self.params, aux, "awgn-full-inner")
        assert "Y2hat" in scheme.labels
        assert scheme.coefficients["nhat"] == pytest.approx(11.6)
        assert covariance(scheme, "X2", "X2") == pytest.approx(2.5)

    def test_unpowered_relay_link_omits_compression(self):
        scheme = build_gaussian_scheme(self.params, AuxParams(alpha=0.5, eta=0.0), "awgn-full-inner")
        assert "Y2hat" not in scheme.labels
        assert math.isinf(scheme.coefficients["nhat"])

    def test_estimate_forward_scheme(self):
        params = ChannelParams(P=10.0, P1=5.0, N1=4.0, N2=1.0)
        scheme = build_gaussian_scheme(params, AuxParams(alpha=0.5, eta=0.5), "ef-partial")
        assert "Y1hat" in scheme.labels
        assert covariance(scheme, "X", "X1") == 0.0
        assert covariance(scheme, "X1", "X1") == pytest.approx(2.5)
        with pytest.raises(DomainError):
            build_gaussian_scheme(self.params, AuxParams(alpha=0.5, eta=0.5), "ef-partial")

    def test_self_interference_coefficients(self):
        scheme = build_gaussian_scheme(self.params, AuxParams(alpha=0.5, beta_fresh=1.0, eta=1.0),
                                       "dawgn-full", a=0.5, b=2.0, d=0.25)
        assert (scheme.coefficients["a"], scheme.coefficients["b"], scheme.coefficients["d"]) == (0.5, 2.0, 0.25)
        # Y1 = X + a X1 + b X2 + Z1 with X independent of X1 when beta = 1
        assert covariance(scheme, "Y1", "X2") == pytest.approx(2.0 * 5.0)
        assert covariance(scheme, "Y2", "X2") == pytest.approx(0.25 * 5.0)
        assert covariance(scheme, "Y1", "X1") == pytest.approx(0.5 * 5.0)

    def test_rejects_unknown_model(self):
        with pytest.raises(DomainError):
            build_gaussian_scheme(self.params, AuxParams(), "no-such-model")

    def test_every_family_builds(self):
        weak_relay = ChannelParams(P=10.0, P1=5.0, N1=4.0, N2=1.0)
        aux = AuxParams(alpha=0.5, beta_fresh=0.5, eta=0.5)
        for model, (_, relay) in SCHEME_FAMILIES.items():
            params = weak_relay if relay == "estimate-forward" else self.params
            scheme = build_gaussian_scheme(params, aux, model)
            assert np.all(np.linalg.eigvalsh(scheme.covariance) > -1e-9)


class TestGaussianScheme:

    def test_from_covariance(self):
        cov = [[1.0, 1.0], [1.0, 2.0]]
        scheme = GaussianScheme.from_covariance(("X", "Y"), cov)
        npt.assert_allclose(scheme.covariance, cov, atol=1e-12)

    def test_from_covariance_rejects_indefinite(self):
        with pytest.raises(DomainError):
            GaussianScheme.from_covariance(("X", "Y"), [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(DomainError):
            GaussianScheme.from_covariance(("X", "Y"), [[1.0, 0.5], [0.0, 1.0]])

    def test_rejects_duplicate_labels(self):
        with pytest.raises(DomainError):
            GaussianScheme(("X", "X"), np.eye(2), np.ones(2))

    def test_unknown_label(self):
        scheme = GaussianScheme.from_covariance(("X",), [[1.0]])
        with pytest.raises(DomainError):
            scheme.index("Y")

    def test_covariance_is_read_only(self):
        scheme = GaussianScheme.from_covariance(("X",), [[1.0]])
        with pytest.raises(ValueError):
            scheme.covariance[0, 0] = 2.0


class TestSampling:

    def setup_method(self):
        params = ChannelParams(P=10.0, P1=5.0, N1=1.0, N2=4.0)
        self.scheme = build_gaussian_scheme(params, AuxParams(alpha=0.3, beta_fresh=0.6), "dawgn-partial")

    def test_same_stream_same_draws(self):
        first = self.scheme.sample(100, seed=7, stream=3)
        second = self.scheme.sample(100, seed=7, stream=3)
        npt.assert_array_equal(first, second)

    def test_streams_are_independent_of_call_order(self):
        self.scheme.sample(50, seed=7, stream=1)
        later = self.scheme.sample(100, seed=7, stream=2)
        fresh = self.scheme.sample(100, seed=7, stream=2)
        npt.assert_array_equal(later, fresh)
        assert not np.array_equal(later, self.scheme.sample(100, seed=7, stream=3))

    def test_sample_covariance(self):
        labels = ["X", "X1", "Y1", "Y2"]
        samples = self.scheme.sample(200_000, seed=11, labels=labels)
        npt.assert_allclose(np.cov(samples.T), self.scheme.covariance_of(labels), rtol=0.05, atol=0.1)

    def test_rejects_nonpositive_count(self):
        with pytest.raises(DomainError):
            self.scheme.sample(0)

    def test_stream_rng_is_philox(self):
        assert isinstance(stream_rng(1, 2).bit_generator, np.random.Philox)
