"""Decoy-state bounds before AOPP."""
import logging

import numpy as np
import pytest

from core.decoy import E1PH_UNDEFINED, decoy_bounds
from core.optics import expected_tally, single_photon_yield
from models.tally import SourceTally


@pytest.fixture(scope='module')
def estimates(published_tally, published_params):
    return decoy_bounds(published_tally, published_params)


class TestPublishedReplay:

    def test_untagged_bits(self, estimates):
        assert estimates.n1_low == pytest.approx(1.29e7, rel=0.05)

    def test_phase_flip_error(self, estimates):
        assert estimates.e1ph_up == pytest.approx(0.1107, rel=0.05)

    def test_no_clamps(self, estimates):
        assert estimates.clamps == []
        assert 0 < estimates.s01_low and 0 < estimates.s10_low

    def test_single_photon_rate_is_intensity_weighted(self, estimates, published_params):
        p = published_params
        expected = (p.mu_a1 * estimates.s10_low + p.mu_b1 * estimates.s01_low) / (p.mu_a1 + p.mu_b1)
        assert estimates.s1_low == pytest.approx(expected)

    def test_records_rates_used(self, estimates):
        for key in ('S_ox_lower', 'S_oy_upper', 'S_oo_upper', 'S_xo_lower', 'S_yo_upper', 'S_oo_lower',
                    'T_X_upper'):
            assert key in estimates.rates

    def test_as_dict_includes_total(self, estimates):
        assert estimates.as_dict()['n1_low'] == estimates.n1_low


class TestVariants:

    def test_n01_uses_s10_rescales_n01(self, published_tally, published_params, estimates):
        printed = decoy_bounds(published_tally, published_params, n01_uses_s10=True)
        assert printed.n10_low == pytest.approx(estimates.n10_low)
        assert printed.n01_low / estimates.n01_low == pytest.approx(estimates.s10_low / estimates.s01_low)

    def test_asymptotic_limit_is_less_conservative(self, published_tally, published_params, estimates):
        asymptotic = decoy_bounds(published_tally, published_params, finite=False)
        assert asymptotic.n1_low > estimates.n1_low
        assert asymptotic.e1ph_up < estimates.e1ph_up

    def test_standard_form(self, published_tally, published_params, estimates):
        standard = decoy_bounds(published_tally, published_params, form='standard')
        assert standard.n1_low == pytest.approx(estimates.n1_low, rel=0.05)

    def test_expected_values_accepted(self, published_tally, published_params):
        expected = SourceTally(sent=published_tally.sent.astype(float), heralded=published_tally.heralded.astype(float),
                               x_effective=43382.0, x_errors=4173.0)
        assert decoy_bounds(expected, published_params).n1_low == pytest.approx(1.29e7, rel=0.05)


class TestClamps:

    def test_missing_decoy_gains_clamp_to_zero(self, published_tally, published_params):
        heralded = published_tally.heralded.copy()
        heralded[[2, 6, 8, 9]] = 0
        tally = SourceTally(sent=published_tally.sent, heralded=heralded, x_effective=43382, x_errors=4173)
        estimates = decoy_bounds(tally, published_params)
        assert estimates.s01_low == 0.0 and estimates.s10_low == 0.0
        assert estimates.n1_low == 0.0
        assert estimates.e1ph_up == E1PH_UNDEFINED
        assert any('s01_low clamped' in c for c in estimates.clamps)
        assert any('e1ph_up set to' in c for c in estimates.clamps)

    def test_no_slice_statistics(self, published_tally, published_params):
        heralded = published_tally.heralded.copy()
        heralded[10] = 0
        tally = SourceTally(sent=published_tally.sent, heralded=heralded, x_effective=0, x_errors=0)
        estimates = decoy_bounds(tally, published_params)
        assert estimates.tx_up is None
        assert estimates.e1ph_up == E1PH_UNDEFINED

    def test_phase_error_bounded(self, published_tally, published_params):
        tally = SourceTally(sent=published_tally.sent, heralded=published_tally.heralded,
                            x_effective=43382, x_errors=43382)
        estimates = decoy_bounds(tally, published_params)
        assert 0.0 <= estimates.e1ph_up <= 1.0
        assert np.isfinite(estimates.n1_low)

    def test_clamps_logged_as_warnings(self, published_tally, published_params, caplog):
        heralded = published_tally.heralded.copy()
        heralded[[2, 6, 8, 9]] = 0
        tally = SourceTally(sent=published_tally.sent, heralded=heralded, x_effective=43382, x_errors=4173)
        with caplog.at_level(logging.WARNING, logger='core.decoy'):
            estimates = decoy_bounds(tally, published_params)
        warned = [r.getMessage() for r in caplog.records if r.levelno == logging.WARNING]
        assert len(warned) == len(estimates.clamps)
        assert any('s10_low clamped' in message for message in warned)


@pytest.mark.parametrize('finite', [True, False])
class TestAgainstLinkModel:
    """Bounds computed from the link model's own expected counts."""

    @pytest.fixture
    def model_estimates(self, published_params, published_channel, finite):
        tally = expected_tally(published_params, published_channel)
        return decoy_bounds(tally, published_params, finite=finite)

    def test_alice_rate_bounded_by_true_yield(self, model_estimates, published_channel):
        true_yield = single_photon_yield(published_channel, 'a')
        assert 0 < model_estimates.s10_low <= true_yield * (1 + 1e-9)

    def test_bob_rate_bounded_by_true_yield(self, model_estimates, published_channel):
        true_yield = single_photon_yield(published_channel, 'b')
        assert 0 < model_estimates.s01_low <= true_yield * (1 + 1e-9)
