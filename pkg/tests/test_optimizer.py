"""Objective, parameter search and distance sweeps."""
import numpy as np
import pytest

from core.exceptions import ParameterError
from core.optics import expected_tally
from core.optimizer import (candidate_params, channel_at_distance, matched_rate_channel, objective, optimize,
                            plob_crossing, sweep_distance)
from core.params import constraint_residual
from core.tally import x_error_rate
from models.search import ParamRange, SearchSpace


class TestObjective:

    def test_published_point(self, published_params, published_channel):
        assert objective(published_params, published_channel) == pytest.approx(4.80e-8, rel=0.10)

    def test_invalid_params_score_zero(self, published_params, published_channel):
        assert objective(published_params.with_values(mu_a1=0.6), published_channel) == 0.0

    def test_higher_misalignment_costs_rate(self, published_params, published_channel):
        worse = objective(published_params, published_channel.with_values(e_dx=0.094))
        assert 0 < worse < objective(published_params, published_channel)

    def test_smooth_around_published_point(self, published_params, published_channel):
        base = objective(published_params, published_channel)
        for name in ('eps_a', 'eps_b', 'mu_a2'):
            for factor in (0.99, 1.01):
                candidate = published_params.with_values(**{name: getattr(published_params, name) * factor})
                space = SearchSpace(base=candidate)
                params = candidate_params(space, {})
                assert objective(params, published_channel) == pytest.approx(base, rel=0.25)


class TestSearchSpace:

    def test_mu_b1_is_not_searchable(self, published_params):
        with pytest.raises(ParameterError, match='mu_b1'):
            SearchSpace(base=published_params, ranges={'mu_b1': ParamRange(0.01, 0.05)})

    def test_unknown_name(self, published_params):
        with pytest.raises(ParameterError):
            SearchSpace(base=published_params, ranges={'alpha': ParamRange(0.0, 1.0)})

    def test_inverted_range(self):
        with pytest.raises(ParameterError):
            ParamRange(0.5, 0.1)

    def test_around(self, published_params):
        space = SearchSpace.around(published_params, relative_width=0.1, free=('eps_a', 'lam'))
        assert space.free_names == ['eps_a']
        assert space.dimension == 1
        assert space.contains(published_params)

    def test_candidate_eliminates_mu_b1(self, published_params):
        space = SearchSpace.around(published_params)
        params = candidate_params(space, {'mu_a1': 0.045})
        assert constraint_residual(params) < 1e-9


class TestOptimize:

    def test_never_worse_than_start(self, published_params, published_channel):
        space = SearchSpace.around(published_params, relative_width=0.1, free=('eps_a', 'eps_b'))
        result = optimize(space, published_channel, budget=40, seed=1, start=published_params)
        start_rate = objective(candidate_params(space, {}), published_channel)
        assert result.rate >= start_rate * (1 - 1e-12)
        assert result.evaluations <= 40
        assert space.contains(result.params)

    @pytest.mark.slow
    def test_full_search_keeps_published_rate(self, published_params, published_channel):
        space = SearchSpace.around(published_params)
        result = optimize(space, published_channel, budget=2000, seed=3, start=published_params)
        assert result.rate >= 4.3e-8

    def test_budget_below_dimension(self, published_params, published_channel):
        space = SearchSpace.around(published_params)
        with pytest.raises(ParameterError, match='budget'):
            optimize(space, published_channel, budget=3)

    def test_empty_feasible_region(self, published_params, published_channel):
        space = SearchSpace(base=published_params, ranges={'mu_a1': ParamRange(0.6, 0.7)})
        with pytest.raises(ParameterError, match='empty feasible region'):
            optimize(space, published_channel, budget=10)


class TestSweep:

    def test_channel_scaling_keeps_arm_ratio(self, published_channel):
        link = channel_at_distance(published_channel, 214.0)
        assert link.l_ac + link.l_bc == pytest.approx(214.0)
        assert link.l_ac / link.l_bc == pytest.approx(223.0 / 205.0)
        assert channel_at_distance(published_channel, 100.0, symmetric=True).l_ac == pytest.approx(50.0)

    def test_negative_distance(self, published_channel):
        with pytest.raises(ParameterError):
            channel_at_distance(published_channel, -1.0)

    def test_matched_rate_link_scales_every_rate(self, published_channel):
        link = matched_rate_channel(published_channel, 1000.0)
        assert link.eta_a / published_channel.eta_a == pytest.approx(1000.0, rel=1e-9)
        assert link.eta_b / published_channel.eta_b == pytest.approx(1000.0, rel=1e-9)
        assert link.p_dark == pytest.approx(1000.0 * published_channel.p_dark)
        assert matched_rate_channel(published_channel, 1.0) is published_channel

    def test_matched_rate_link_keeps_error_rates(self, published_params, published_channel):
        original = expected_tally(published_params, published_channel)
        scaled = expected_tally(published_params, matched_rate_channel(published_channel, 1000.0))
        assert scaled.e_count / scaled.n_t == pytest.approx(original.e_count / original.n_t, abs=0.005)
        assert x_error_rate(scaled)[1] == pytest.approx(x_error_rate(original)[1], abs=0.005)
        assert scaled.n_t / original.n_t == pytest.approx(1000.0, rel=0.05)

    @pytest.mark.parametrize('factor', [0.5, 1e9])
    def test_matched_rate_factor_range(self, published_channel, factor):
        with pytest.raises(ParameterError):
            matched_rate_channel(published_channel, factor)

    def test_fixed_parameter_sweep(self, published_params, published_channel):
        sweep = sweep_distance(published_channel, np.linspace(250, 450, 9), params=published_params)
        assert list(sweep['distance_km']) == pytest.approx(list(np.linspace(250, 450, 9)))
        positive = sweep[sweep['rate'] > 0]['rate'].to_numpy()
        assert (np.diff(positive) < 0).all()
        assert (np.diff(sweep['plob_absolute'].to_numpy()) < 0).all()
        crossing = plob_crossing(sweep)
        assert crossing is not None and 300 < crossing < 428

    def test_published_point_in_sweep(self, published_params, published_channel):
        sweep = sweep_distance(published_channel, [428.0], params=published_params)
        assert sweep['rate'].iloc[0] == pytest.approx(4.80e-8, rel=0.10)
        assert sweep['l_ac'].iloc[0] == pytest.approx(223.0)

    def test_empty_grid(self, published_params, published_channel):
        with pytest.raises(ParameterError, match='empty'):
            sweep_distance(published_channel, [], params=published_params)

    def test_needs_params_or_space(self, published_channel):
        with pytest.raises(ParameterError):
            sweep_distance(published_channel, [100.0])
