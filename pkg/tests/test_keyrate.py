"""Key length, PLOB comparators and the end-to-end analysis."""
import dataclasses

import numpy as np
import pytest

from core.analysis import analyze
from core.keyrate import binary_entropy, key_length_terms, key_rate, plob_bounds
from core.optics import expected_tally
from models.tally import SourceTally


class TestEntropy:

    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(1.0)

    def test_symmetric_and_vectorised(self):
        values = binary_entropy(np.array([0.11, 0.89]))
        assert values[0] == pytest.approx(values[1])
        assert values[0] == pytest.approx(0.4999, abs=1e-3)


class TestPlob:

    def test_published_bounds(self, published_channel):
        absolute, relative = plob_bounds(published_channel)
        assert absolute == pytest.approx(1.78e-8, rel=0.02)
        assert relative == pytest.approx(5.01e-9, rel=0.02)

    def test_total_loss(self, published_channel):
        assert published_channel.total_loss_db == pytest.approx(79.126, abs=1e-3)

    def test_lossless_link_is_unbounded(self, published_channel):
        absolute, _ = plob_bounds(published_channel.with_values(l_ac=0.0, l_bc=0.0))
        assert absolute == float('inf')


class TestPublishedReplay:

    def test_key_rate(self, published_result):
        assert published_result.report.rate_per_pulse == pytest.approx(4.80e-8, rel=0.10)
        assert published_result.report.reason is None

    def test_beats_repeaterless_bound(self, published_result):
        report = published_result.report
        assert 2.4 < report.ratio_absolute < 3.1
        assert report.ratio_relative > 8

    def test_bits_per_second(self, published_result):
        assert published_result.report.rate_bps == pytest.approx(3.36, rel=0.10)

    def test_key_length_terms_add_up(self, published_result, published_params):
        terms = key_length_terms(published_result.chain, published_params)
        length = (terms['untagged_entropy'] - terms['error_correction']
                  - terms['correctness'] - terms['privacy_amplification'])
        assert published_result.report.key_length == pytest.approx(length)

    def test_sifted_statistics_carried(self, published_result):
        assert published_result.sifted.n_t == 27921308
        assert published_result.chain.n_t == 27921308


class TestZeroKey:

    def test_missing_chain(self, published_params, published_channel):
        report = key_rate(None, published_params, published_channel)
        assert report.key_length == 0.0
        assert report.reason == 'analysis infeasible'
        assert report.plob_absolute > 0

    def test_phase_error_above_half(self, published_result, published_params):
        chain = dataclasses.replace(published_result.chain, e1ph_prime=0.6)
        report = key_rate(chain, published_params)
        assert report.key_length == 0.0
        assert 'exceeds 0.5' in report.reason

    def test_costs_exceed_entropy(self, published_result, published_params):
        report = key_rate(published_result.chain, published_params.with_values(f=100.0))
        assert report.key_length == 0.0
        assert report.reason.startswith('error-correction and finite-size costs')

    def test_no_untagged_bits(self, published_result, published_params):
        chain = dataclasses.replace(published_result.chain, n1_prime=0.0)
        assert key_rate(chain, published_params).reason == 'no untagged bits after AOPP'

    def test_no_effective_events(self, published_tally, published_params, published_channel):
        empty = SourceTally(sent=published_tally.sent, heralded=np.zeros(16, dtype=np.int64))
        result = analyze(empty, published_params, published_channel)
        assert result.report.rate_per_pulse == 0.0
        assert result.report.reason == 'no effective events'
        assert result.chain is None

    def test_small_run_reports_reason(self, published_tally, published_params, published_channel):
        scaled = SourceTally(sent=published_tally.sent // 100000, heralded=published_tally.heralded // 100000,
                             x_effective=0, x_errors=0)
        result = analyze(scaled, published_params.with_values(n_total=float(scaled.total_sent)), published_channel)
        assert result.report.key_length == 0.0
        assert result.report.reason


class TestMonotonicity:

    @pytest.mark.parametrize('field', ['e1ph_prime', 'E_prime'])
    def test_rate_non_increasing_in_error_rates(self, published_result, published_params, field):
        chains = [dataclasses.replace(published_result.chain, **{field: value}) for value in np.linspace(0.0, 0.5, 51)]
        rates = [key_rate(chain, published_params).rate_per_pulse for chain in chains]
        assert np.all(np.diff(rates) <= 0)
        assert rates[0] > rates[-1] == 0.0

    def test_blind_detectors_give_no_key(self, published_params, published_channel):
        channel = published_channel.with_values(eta_d=0.0)
        result = analyze(expected_tally(published_params, channel), published_params, channel)
        assert result.report.rate_per_pulse == 0.0
        assert result.report.reason
