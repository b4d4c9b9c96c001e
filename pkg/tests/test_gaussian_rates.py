import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st

from error_handling import DomainError
from gaussian_rates import (
    AuxParams,
    BoundaryCase,
    ChannelParams,
    ConstraintSet,
    RateTriple,
    _beta_star_gap,
    alpha0_and_case,
    bc_rates,
    beta_star,
    beta_star_bisection,
    c_of,
    combination,
    compression_terms,
    df_partial_rates,
    ef_partial_rates,
    feedback_rates,
    full_feedback_rates,
    full_inner_rates,
    full_outer_rates,
    harmonic_noise,
    nhat_min,
    optimal_sum_rate_bound,
    p1_saturation_threshold,
    partial_outer_rates,
)


def C(x):
    return 0.5 * math.log2(1.0 + x)


class TestCapacityFunction:

    def test_known_values(self):
        assert c_of(0) == 0.0
        assert c_of(3) == pytest.approx(1.0, abs=1e-15)
        assert c_of(1) == pytest.approx(0.5, abs=1e-15)

    def test_array_input(self):
        npt.assert_allclose(c_of([0.0, 1.0, 3.0]), [0.0, 0.5, 1.0], atol=1e-15)

    def test_rejects_negative_and_nan(self):
        with pytest.raises(DomainError):
            c_of(-1.0)
        with pytest.raises(DomainError):
            c_of(float("nan"))

    @given(st.floats(0.0, 1e6), st.floats(0.0, 1e6))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert c_of(lo) <= c_of(hi)


class TestHarmonicNoise:

    def test_examples(self):
        assert harmonic_noise(1, 1) == pytest.approx(0.5)
        assert harmonic_noise(1, 4) == pytest.approx(0.8)
        assert harmonic_noise(2, 2) == pytest.approx(1.0)

    def test_rejects_zero(self):
        with pytest.raises(DomainError):
            harmonic_noise(0.0, 1.0)

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_below_both_noises(self, n1, n2):
        assert harmonic_noise(n1, n2) <= min(n1, n2) * (1 + 1e-12)


class TestChannelParams:

    def test_validation(self):
        with pytest.raises(DomainError):
            ChannelParams(P=-1.0)
        with pytest.raises(DomainError):
            ChannelParams(P=1.0, N1=0.0)
        with pytest.raises(DomainError):
            AuxParams(alpha=1.5)
        with pytest.raises(DomainError):
            RateTriple(r1=-0.1)

    def test_noise_order_checks(self, params, weak_relay_params):
        params.require_weak_user_two("test")
        weak_relay_params.require_weak_relay("test")
        with pytest.raises(DomainError):
            params.require_weak_relay("test")
        with pytest.raises(DomainError):
            weak_relay_params.require_weak_user_two("test")

    def test_hashable_by_value(self):
        assert ChannelParams(P=10, N1=1, N2=4) == ChannelParams(P=10.0, N1=1.0, N2=4.0)
        assert hash(ChannelParams(P=10, N1=1, N2=4)) == hash(ChannelParams(P=10.0, N1=1.0, N2=4.0))


class TestConstraintSet:

    def test_combination_parsing(self):
        assert combination("r0+r2:relay-decode") == (1, 0, 1)
        assert combination("r1") == (0, 1, 0)
        with pytest.raises(DomainError):
            combination("r3")
        with pytest.raises(DomainError):
            ConstraintSet({"r1+x": 1.0})

    def test_bound_takes_tightest_label(self):
        cs = ConstraintSet({"r0+r2:a": 2.0, "r0+r2:b": 1.5, "r1": 1.0})
        assert cs.bound("r0+r2") == 1.5
        with pytest.raises(KeyError):
            cs.bound("r0+r1")

    def test_margin_and_satisfaction(self):
        cs = ConstraintSet({"r0+r2": 1.0, "r1": 2.0})
        assert cs.margin(RateTriple(0.25, 1.0, 0.25)) == pytest.approx(0.5)
        assert cs.is_satisfied(RateTriple(0.5, 2.0, 0.5))
        assert not cs.is_satisfied(RateTriple(0.5, 2.0, 0.6))

    def test_slice_corner(self):
        cs = ConstraintSet({"r0+r2": 1.0, "r1": 2.0, "r0+r1": 2.5})
        r1, r2 = cs.slice_corner(0.75)
        assert float(r1) == pytest.approx(1.75)
        assert float(r2) == pytest.approx(0.25)

    def test_slice_corner_rejects_coupled_bounds(self):
        with pytest.raises(DomainError):
            ConstraintSet({"r1+r2": 1.0, "r1": 1.0, "r2": 1.0}).slice_corner(0.0)


class TestBroadcastRates:

    def setup_method(self):
        self.params = ChannelParams(P=10.0, N1=1.0, N2=4.0)

    def test_endpoints(self):
        full = bc_rates(self.params, 1.0)
        assert full["r1"] == pytest.approx(C(10.0))
        assert full["r2"] == pytest.approx(0.0)
        none = bc_rates(self.params, 0.0)
        assert none["r1"] == pytest.approx(0.0)
        assert none["r2"] == pytest.approx(C(2.5))

    def test_midpoint(self):
        cs = bc_rates(self.params, 0.5)
        assert cs["r1"] == pytest.approx(1.29248, abs=1e-5)
        assert cs["r2"] == pytest.approx(C(5.0 / 9.0), abs=1e-15)
        assert cs["r2"] == pytest.approx(0.3187, abs=1e-3)

    def test_flipped_noise_order(self):
        flipped = bc_rates(ChannelParams(P=10.0, N1=4.0, N2=1.0), 0.5)
        assert flipped["r2"] == pytest.approx(C(5.0))
        assert flipped["r1"] == pytest.approx(C(5.0 / 9.0))


class TestDecodeForwardRates:

    def test_no_cloud_power(self):
        cs = df_partial_rates(10.0, 5.0, 1.0, 4.0, 1.0, 0.3)
        assert cs["r1"] == pytest.approx(C(10.0))
        assert cs["r0+r2:relay-decode"] == pytest.approx(0.0)
        assert cs["r0+r2:multiple-access"] == pytest.approx(C(5.0 / 14.0))

    def test_all_fresh_has_no_coherent_term(self):
        cs = df_partial_rates(10.0, 5.0, 1.0, 4.0, 0.4, 1.0)
        assert cs["r0+r2:multiple-access"] == pytest.approx(C((5.0 + 6.0) / (4.0 + 4.0)))

    def test_relay_off_matches_broadcast(self):
        beta = beta_star(10.0, 0.0, 1.0, 4.0, 0.5)
        cs = df_partial_rates(10.0, 0.0, 1.0, 4.0, 0.5, beta)
        best = min(cs["r0+r2:multiple-access"], cs["r0+r2:relay-decode"])
        assert best == pytest.approx(C(5.0 / 9.0), abs=1e-12)
        assert best == pytest.approx(bc_rates(ChannelParams(P=10.0, N1=1.0, N2=4.0), 0.5)["r2"], abs=1e-12)

    def test_broadcasts_grids(self):
        alpha, beta = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 3), indexing="ij")
        cs = df_partial_rates(10.0, 5.0, 1.0, 4.0, alpha, beta)
        assert cs["r0+r2:multiple-access"].shape == (5, 3)
        scalar = df_partial_rates(10.0, 5.0, 1.0, 4.0, alpha[2, 1], beta[2, 1])
        assert cs["r0+r2:relay-decode"][2, 1] == pytest.approx(scalar["r0+r2:relay-decode"])

    def test_rejects_out_of_range_knobs(self):
        with pytest.raises(DomainError):
            df_partial_rates(10.0, 5.0, 1.0, 4.0, 1.2, 0.5)
        with pytest.raises(DomainError):
            df_partial_rates(10.0, 5.0, 0.0, 4.0, 0.5, 0.5)


class TestBetaStar:

    def test_interior_root(self):
        beta = beta_star(10.0, 5.0, 1.0, 4.0, 0.1)
        assert beta == pytest.approx(0.8518, abs=1e-3)
        assert abs(_beta_star_gap(beta, 10.0, 5.0, 1.0, 4.0, 0.1)) < 1e-12
        assert beta == pytest.approx(beta_star_bisection(10.0, 5.0, 1.0, 4.0, 0.1), abs=1e-12)

    def test_saturates_above_alpha0(self):
        for alpha in (0.3125, 0.5, 0.9, 1.0):
            assert beta_star(10.0, 5.0, 1.0, 4.0, alpha) == 1.0

    def test_relay_off_closed_form(self):
        for alpha in (0.0, 0.25, 0.5, 0.75):
            expected = (alpha * 10.0 + 1.0) / (alpha * 10.0 + 4.0)
            assert beta_star(10.0, 0.0, 1.0, 4.0, alpha) == pytest.approx(expected, abs=1e-12)
            assert beta_star_bisection(10.0, 0.0, 1.0, 4.0, alpha) == pytest.approx(expected, abs=1e-12)

    def test_vectorised_matches_scalar(self):
        alphas = np.linspace(0.0, 1.0, 11)
        vector = beta_star(10.0, 5.0, 1.0, 4.0, alphas)
        scalars = [beta_star(10.0, 5.0, 1.0, 4.0, float(a)) for a in alphas]
        npt.assert_allclose(vector, scalars, atol=1e-14)

    @given(
        st.floats(0.1, 20.0), st.floats(0.0, 20.0), st.floats(0.1, 5.0),
        st.floats(0.05, 5.0), st.floats(0.0, 1.0),
    )
    def test_agrees_with_bisection(self, P, P1, Na, extra, alpha):
        Nb = Na + extra
        assert beta_star(P, P1, Na, Nb, alpha) == pytest.approx(
            beta_star_bisection(P, P1, Na, Nb, alpha), abs=1e-9
        )

    def test_agrees_with_bisection_on_seeded_sweep(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            P, P1, Na = rng.uniform(1.0, 20.0), rng.uniform(0.0, 20.0), rng.uniform(0.5, 5.0)
            Nb = Na + rng.uniform(0.5, 5.0)
            alpha = rng.choice([0.0, 1e-6, 1e-3, rng.uniform(0.0, 1.0)])
            assert beta_star(P, P1, Na, Nb, alpha) == pytest.approx(
                beta_star_bisection(P, P1, Na, Nb, alpha), abs=1e-9
            )

    @given(st.floats(0.0, 20.0), st.floats(0.0, 1.0))
    def test_maximises_smaller_bound(self, P1, alpha):
        best, beta = optimal_sum_rate_bound(10.0, P1, 1.0, 4.0, alpha)
        grid = np.linspace(0.0, 1.0, 101)
        cs = df_partial_rates(10.0, P1, 1.0, 4.0, alpha, grid)
        smaller = np.minimum(cs["r0+r2:multiple-access"], cs["r0+r2:relay-decode"])
        assert best >= smaller.max() - 1e-9
        assert 0.0 <= beta <= 1.0


class TestThresholds:

    def test_alpha0_cases(self):
        assert alpha0_and_case(10.0, 30.0, 1.0, 4.0) == (BoundaryCase.SATURATED, 0.0)
        case, alpha0 = alpha0_and_case(10.0, 5.0, 1.0, 4.0)
        assert case is BoundaryCase.MIXED
        assert alpha0 == pytest.approx(0.3125)
        assert alpha0_and_case(10.0, 0.0, 1.0, 4.0) == (BoundaryCase.MIXED, 1.0)

    def test_alpha0_requires_weak_user_two(self):
        with pytest.raises(DomainError):
            alpha0_and_case(10.0, 5.0, 4.0, 1.0)

    def test_saturation_threshold(self):
        assert p1_saturation_threshold(10.0, 1.0, 4.0) == pytest.approx(30.0)
        assert p1_saturation_threshold(0.0, 1.0, 4.0) == 0.0
        assert p1_saturation_threshold(10.0, 1.0, 1.0 + 1e-3) == pytest.approx(1e-2)

    def test_threshold_marks_saturation(self):
        threshold = p1_saturation_threshold(10.0, 1.0, 4.0)
        case, _ = alpha0_and_case(10.0, threshold, 1.0, 4.0)
        assert case is BoundaryCase.SATURATED
        case, _ = alpha0_and_case(10.0, 0.99 * threshold, 1.0, 4.0)
        assert case is BoundaryCase.MIXED


class TestPartialRegions:

    def test_feedback_uses_harmonic_noise(self, params):
        cs = feedback_rates(params, 1.0, 0.5)
        assert cs["r1"] == pytest.approx(C(10.0 / 0.8))

    def test_full_feedback_is_partial_feedback(self, params):
        assert full_feedback_rates is feedback_rates

    def test_outer_bound_examples(self, params):
        all_private = partial_outer_rates(params, 1.0, 0.5)
        assert all_private["r1"] == pytest.approx(C(12.5))
        assert all_private["r0+r1"] == pytest.approx(C(10.0))
        assert all_private["r0+r2:relay-decode"] == pytest.approx(0.0)
        nothing_fresh = partial_outer_rates(params, 0.3, 0.0)
        assert nothing_fresh["r0+r2:relay-decode"] == pytest.approx(0.0)
        assert nothing_fresh["r0+r1"] == pytest.approx(C(3.0))

    def test_outer_dominates_inner(self, params):
        alpha, beta = np.meshgrid(np.linspace(0, 1, 32), np.linspace(0, 1, 32), indexing="ij")
        outer = partial_outer_rates(params, alpha, beta)
        inner = df_partial_rates(params.P, params.P1, params.N1, params.N2, alpha, beta)
        for label in inner:
            assert np.all(outer[label] >= inner[label] - 1e-15)

    def test_estimate_forward_examples(self, weak_relay_params):
        p = weak_relay_params
        silent = ef_partial_rates(p, 0.5, 0.0)
        assert silent["r2"] == pytest.approx(C(5.0 / p.N2))
        assert silent["r0+r1"] == pytest.approx(min(C(5.0 / (5.0 + p.N1)), C(5.0 / (5.0 + p.N2))))
        assert ef_partial_rates(p, 0.0, 0.7)["r2"] == pytest.approx(0.0)
        assert ef_partial_rates(p, 0.5, 0.5)["r2"] > C(5.0 / p.N2) + 1e-3

    def test_estimate_forward_needs_weak_relay(self, params):
        with pytest.raises(DomainError):
            ef_partial_rates(params, 0.5, 0.5)


class TestCompression:

    def test_nhat_examples(self):
        assert nhat_min(10.0, 5.0, 1.0, 4.0, 0.0, 0.5) == pytest.approx(4.0 / 2.5)
        assert nhat_min(10.0, 5.0, 1.0, 4.0, 0.5, 0.5) == pytest.approx(11.6)
        assert math.isinf(nhat_min(10.0, 5.0, 1.0, 4.0, 0.5, 0.0))

    @given(st.floats(0.0, 1.0), st.floats(0.01, 1.0))
    def test_constraint_tight_at_nhat_min(self, alpha, eta):
        terms = compression_terms(10.0, 5.0, 1.0, 4.0, alpha, eta)
        assert terms["relay-link"] == pytest.approx(
            terms["description"] - terms["side-information"], abs=1e-10
        )

    def test_no_relay_power_drops_compression(self):
        terms = compression_terms(10.0, 5.0, 1.0, 4.0, 0.5, 0.0)
        assert terms == {"relay-link": 0.0, "description": 0.0, "side-information": 0.0}


class TestFullRegions:

    def test_inner_reduces_without_second_relay(self, params):
        reference = df_partial_rates(params.P, params.P1, params.N1, params.N2, 0.4, 0.6)
        silent = full_inner_rates(params, 0.4, 0.6, 0.0)
        unpowered = full_inner_rates(params.with_powers(P2=0.0), 0.4, 0.6, 0.8)
        for label in reference:
            assert silent[label] == pytest.approx(reference[label], abs=1e-15)
            assert unpowered[label] == pytest.approx(reference[label], abs=1e-15)

    def test_inner_compression_gain(self, params):
        beta = beta_star(params.P, params.P1, params.N1 + 2.5, params.N2, 0.5)
        cs = full_inner_rates(params, 0.5, beta, 0.5)
        assert cs["r1"] > C(5.0 / params.N1)

    def test_outer_split_extremes(self, params):
        harmonic = harmonic_noise(params.N1, params.N2)
        no_split = full_outer_rates(params, 0.4, 0.5, 0.0)
        assert no_split["r2"] == pytest.approx(0.0)
        assert no_split["r0+r1:split"] == pytest.approx(C((4.0 + 0.5 * 6.0) / harmonic))
        assert full_outer_rates(params, 0.4, 0.5, 1.0)["r0+r1:split"] == pytest.approx(0.0)

    def test_outer_multiple_access_bound(self, params):
        cs = full_outer_rates(params, 0.4, 0.5, 0.3)
        coherent = 2.0 * math.sqrt(0.5 * 6.0 * params.P2)
        assert cs["r0+r1:multiple-access"] == pytest.approx(C((params.P + params.P2 + coherent) / params.N1))
        feedback = partial_outer_rates(params, 0.4, 0.5)
        for label in ("r0+r2:multiple-access", "r0+r2:relay-decode", "r1"):
            assert cs[label] == pytest.approx(feedback[label])

    def test_values_nonnegative_and_finite(self, params):
        alpha, beta, knob = np.meshgrid(*(np.linspace(0, 1, 9),) * 3, indexing="ij")
        for cs in (
            full_inner_rates(params, alpha, beta, knob),
            full_outer_rates(params, alpha, beta, knob),
            partial_outer_rates(params, alpha, beta),
        ):
            for label in cs:
                values = np.asarray(cs[label])
                assert np.all(np.isfinite(values))
                assert np.all(values >= 0.0)
