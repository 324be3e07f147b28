"""AOPP pairing and the finite-key chain."""
import dataclasses
import math

import numpy as np
import pytest

from core.aopp import aopp_chain, aopp_simulate, expected_aopp, solve_r
from core.decoy import decoy_bounds
from core.exceptions import AnalysisInfeasibleError, ParameterError
from core.optics import expected_tally, simulate_events
from core.optimizer import matched_rate_channel
from core.tally import sifted_from_tally, tally_and_sift
from models.tally import SiftedKeys


@pytest.fixture(scope='module')
def sifted(published_tally):
    return sifted_from_tally(published_tally)


@pytest.fixture(scope='module')
def estimates(published_tally, published_params):
    return decoy_bounds(published_tally, published_params)


@pytest.fixture(scope='module')
def chain(estimates, sifted, published_params):
    outcome = expected_aopp(sifted)
    return aopp_chain(estimates, sifted, outcome.n_g, outcome.n_odd, published_params, outcome=outcome)


class TestPairing:

    def test_error_free_strings_keep_every_pair(self):
        z = np.array([0, 1] * 50, dtype=np.uint8)
        outcome = aopp_simulate(z, z, seed=1)
        assert outcome.n_g == 50
        assert outcome.nt_prime == 50
        assert outcome.E_prime == 0.0
        assert outcome.kept.all()

    def test_pairs_join_bob_zero_with_bob_one(self):
        rng = np.random.default_rng(0)
        z_b = rng.integers(0, 2, 400).astype(np.uint8)
        z_a = np.where(rng.random(400) < 0.25, 1 - z_b, z_b)
        outcome = aopp_simulate(z_a, z_b, seed=3)
        assert (z_b[outcome.pairs[:, 0]] == 0).all()
        assert (z_b[outcome.pairs[:, 1]] == 1).all()
        assert outcome.n_g == min((z_b == 0).sum(), (z_b == 1).sum())
        assert outcome.discarded == outcome.n_g - outcome.nt_prime

    def test_pairing_reduces_errors(self):
        rng = np.random.default_rng(7)
        z_b = rng.integers(0, 2, 20000).astype(np.uint8)
        z_a = np.where(rng.random(20000) < 0.28, 1 - z_b, z_b)
        outcome = aopp_simulate(z_a, z_b, seed=4)
        # survivors are wrong only when both bits were wrong: 0.28^2 / (0.28^2 + 0.72^2)
        assert outcome.E_prime == pytest.approx(0.1314, abs=0.02)

    def test_reproducible(self):
        z = np.array([0, 1, 1, 0, 1, 0, 0, 1], dtype=np.uint8)
        a = aopp_simulate(z, z[::-1].copy(), seed=9)
        b = aopp_simulate(z, z[::-1].copy(), seed=9)
        assert np.array_equal(a.pairs, b.pairs)
        assert a.nt_prime == b.nt_prime

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            aopp_simulate([0, 1, 1], [0, 1])

    def test_exhaustive_four_bit_pairs(self):
        strings = [np.array([(v >> i) & 1 for i in range(4)], dtype=np.uint8) for v in range(16)]
        for z_a in strings:
            for z_b in strings:
                outcome = aopp_simulate(z_a, z_b, seed=5)
                zeros, ones = outcome.pairs[:, 0], outcome.pairs[:, 1]
                assert outcome.n_g == min((z_b == 0).sum(), (z_b == 1).sum())
                assert len(outcome.pairs) == outcome.n_g
                assert (z_b[zeros] == 0).all() and (z_b[ones] == 1).all()
                assert len(set(zeros) | set(ones)) == 2 * outcome.n_g
                parity = z_a[zeros] ^ z_a[ones]
                assert outcome.kept.tolist() == (parity == 1).tolist()
                assert outcome.nt_prime == int(parity.sum())
                survivors = outcome.pairs[outcome.kept]
                wrong_first = z_a[survivors[:, 0]] != z_b[survivors[:, 0]]
                wrong_second = z_a[survivors[:, 1]] != z_b[survivors[:, 1]]
                assert wrong_first.tolist() == wrong_second.tolist()
                if outcome.nt_prime:
                    assert outcome.E_prime == pytest.approx(wrong_first.sum() / outcome.nt_prime)
                else:
                    assert outcome.E_prime == 0.0

    def test_expected_outcome_at_published_point(self, sifted):
        outcome = expected_aopp(sifted)
        assert outcome.n_g == sifted.n_t1
        assert outcome.E_prime == pytest.approx(0.0069, abs=0.003)
        assert outcome.nt_prime == pytest.approx(5.66e6, rel=0.03)


class TestSolveR:

    def test_fixed_point(self):
        n, k, eps = 1.2e5, 3.0e5, 1e-10
        r, iterations = solve_r(n, k, eps)
        assert r == pytest.approx((2 * n + k) / k * math.log(3 * k * k / eps), rel=1e-9)
        assert iterations >= 1

    def test_callable_trace_distance(self):
        r, _ = solve_r(1e5, 2e5, lambda r, k: 1e-10 * (1 + 1 / (1 + r)))
        assert r > 0

    def test_non_positive_k(self):
        with pytest.raises(AnalysisInfeasibleError):
            solve_r(1e5, 0.0)

    def test_trace_distance_range(self):
        with pytest.raises(ParameterError):
            solve_r(1e5, 2e5, 1.5)


class TestChain:

    def test_untagged_bits_after_pairing(self, chain):
        assert chain.n1_prime == pytest.approx(2.38e6, rel=0.05)

    def test_phase_flip_error_after_pairing(self, chain):
        assert chain.e1ph_prime == pytest.approx(0.2024, rel=0.05)

    def test_intermediates_consistent(self, chain):
        assert chain.u == pytest.approx(chain.n_g / (2 * chain.n_odd))
        assert chain.k == pytest.approx(chain.u * chain.n1_low - 2 * chain.n)
        assert 0 < chain.e_tau <= 1
        assert chain.r < 2 * chain.n
        assert chain.r_iterations >= 1

    def test_zero_phase_error_input(self, estimates, sifted, published_params):
        perfect = dataclasses.replace(estimates, e1ph_up=0.0)
        outcome = expected_aopp(sifted)
        chain = aopp_chain(perfect, sifted, outcome.n_g, outcome.n_odd, published_params)
        assert chain.e1ph_prime >= 2 * chain.r / chain.n1_prime
        assert chain.e1ph_prime < 1e-3

    def test_n_g_above_population(self, estimates, sifted, published_params):
        with pytest.raises(ParameterError):
            aopp_chain(estimates, sifted, sifted.n_t0 + 1, 1e6, published_params)

    def test_n_odd_must_be_positive(self, estimates, sifted, published_params):
        with pytest.raises(ParameterError):
            aopp_chain(estimates, sifted, 10, 0, published_params)

    def test_too_few_untagged_bits(self, estimates, published_params):
        small = SiftedKeys(n_t=200, n_t0=120, n_t1=80, e_count=50)
        tiny = dataclasses.replace(estimates, n10_low=3.0, n01_low=2.0)
        with pytest.raises(AnalysisInfeasibleError):
            aopp_chain(tiny, small, 80, 96, published_params)


SCALED_PAIRS = 20_000_000
RATE_FACTOR = 1000.0


@pytest.fixture(scope='module')
def simulated(published_params, published_channel):
    """Sifted keys of a Monte-Carlo run on the matched-rate field-test link, and their expected statistics."""
    channel = matched_rate_channel(published_channel, RATE_FACTOR)
    params = published_params.with_values(n_total=float(SCALED_PAIRS))
    _, sifted = tally_and_sift(simulate_events(params, channel, SCALED_PAIRS, seed=31), params)
    return sifted, sifted_from_tally(expected_tally(params, channel))


@pytest.mark.slow
class TestScaledOperatingPoint:

    def test_sifted_error_rate(self, simulated):
        sifted, model = simulated
        assert sifted.has_strings and sifted.n_t > 50000
        sigma = math.sqrt(model.E * (1 - model.E) / sifted.n_t)
        assert abs(sifted.E - model.E) <= 5 * sigma
        assert sifted.E == pytest.approx(0.2784, abs=0.015)

    def test_pairing_statistics(self, simulated):
        sifted, model = simulated
        outcome = aopp_simulate(sifted.z_a, sifted.z_b, seed=31)
        expected = expected_aopp(model)
        keep = expected.nt_prime / expected.n_g
        assert outcome.nt_prime / outcome.n_g == pytest.approx(keep, abs=5 * math.sqrt(keep * (1 - keep) / outcome.n_g))
        floor = max(expected.E_prime, 1 / outcome.nt_prime)
        assert abs(outcome.E_prime - expected.E_prime) <= 5 * math.sqrt(floor / outcome.nt_prime)
        assert outcome.E_prime == pytest.approx(0.0069, abs=0.003)
