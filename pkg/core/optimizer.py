"""
Parameter search for the expected key rate, and distance sweeps.

The objective runs the whole expected-value pipeline (closed-form tally,
decoy bounds, expected AOPP outcome, finite-key chain) so the optimum already
accounts for the finite data size of the run.
"""
import logging
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from config.settings import config
from core.analysis import analyze
from core.exceptions import ParameterError, QKDError
from core.keyrate import plob_bounds
from core.optics import expected_tally
from core.params import solve_mu_b1, validate
from models.params import ChannelModel, ProtocolParams
from models.search import OptimizationResult, SearchSpace

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 3
DEFAULT_LAMBDA_STEPS = 5


# ============================================================================
# OBJECTIVE
# ============================================================================

def objective(params: ProtocolParams, channel: ChannelModel, form: Optional[str] = None) -> float:
    """Expected key rate per pulse; any pipeline failure counts as 0."""
    if not validate(params).ok:
        return 0.0
    try:
        tally = expected_tally(params, channel)
        result = analyze(tally, params, channel, form=form)
    except (QKDError, ValueError, ZeroDivisionError, OverflowError) as e:
        logger.debug("Objective failed at %s: %s", params, e)
        return 0.0
    return result.report.rate_per_pulse


def candidate_params(space: SearchSpace, values: dict) -> Optional[ProtocolParams]:
    """Protocol parameters for one candidate, mu_b1 eliminated; None if infeasible."""
    try:
        params = space.base.with_values(**values)
        params = params.with_values(mu_b1=solve_mu_b1(params))
    except (ParameterError, ZeroDivisionError):
        return None
    return params if validate(params).ok else None


class _Evaluator:
    """Counts evaluations within a budget and remembers the best candidate."""

    def __init__(self, space, channel, budget, form):
        self.space = space
        self.channel = channel
        self.budget = budget
        self.form = form
        self.evaluations = 0
        self.feasible = 0
        self.best_rate = -1.0
        self.best_params = None

    def __call__(self, values: dict) -> float:
        if self.evaluations >= self.budget:
            return 0.0
        self.evaluations += 1
        params = candidate_params(self.space, values)
        if params is None:
            return 0.0
        self.feasible += 1
        rate = objective(params, self.channel, self.form)
        if rate > self.best_rate:
            self.best_rate, self.best_params = rate, params
        return rate


def _lambda_grid(space: SearchSpace, steps: int):
    lam = space.ranges['lam']
    if not lam.is_free:
        return [lam.midpoint]
    if lam.lower > 0:
        return list(np.geomspace(lam.lower, lam.upper, steps))
    return list(np.linspace(lam.lower, lam.upper, steps))


# ============================================================================
# SEARCH
# ============================================================================

def optimize(space: SearchSpace, channel: ChannelModel, budget: int = 2000,
             seed: Optional[int] = None, restarts: int = DEFAULT_RESTARTS,
             lambda_steps: int = DEFAULT_LAMBDA_STEPS, start: Optional[ProtocolParams] = None,
             form: Optional[str] = None) -> OptimizationResult:
    """Nelder-Mead over the free parameters with random restarts; lambda on an outer grid.

    The space midpoint and `start` (when inside the space) are always evaluated
    first, so the result is never worse than either.

    Args:
        space: Search box; mu_b1 follows from the security constraint.
        channel: Link model used by the objective.
        budget: Total objective evaluations.
        seed: Restart seed (config.SEED by default).

    Raises:
        ParameterError: budget below dimension + 1, or no feasible candidate.
    """
    dim = space.dimension
    if budget < dim + 1:
        raise ParameterError(f"budget {budget} is below dimension + 1 = {dim + 1}")
    seed = config.SEED if seed is None else seed
    rng = np.random.Generator(np.random.Philox(key=seed))
    evaluate = _Evaluator(space, channel, budget, form)
    names = space.free_names
    lower, upper = space.lower_upper()
    lambdas = _lambda_grid(space, lambda_steps)
    history = []

    def values_for(z, lam):
        values = space.midpoint_values()
        if dim:
            x = lower + np.clip(z, 0.0, 1.0) * (upper - lower)
            values.update(zip(names, x.tolist()))
        values['lam'] = lam
        return values

    starts = [np.full(dim, 0.5)]
    if start is not None and space.contains(start) and dim:
        span = np.where(upper > lower, upper - lower, 1.0)
        starts.insert(0, (np.array([getattr(start, n) for n in names]) - lower) / span)
    if start is not None and space.contains(start):
        evaluate(values_for(starts[0], start.lam))
    evaluate(values_for(np.full(dim, 0.5), space.ranges['lam'].midpoint))

    runs = len(lambdas) * (len(starts) + restarts) if dim else len(lambdas)
    per_run = max(dim + 1, (budget - evaluate.evaluations) // max(runs, 1))
    for lam in lambdas:
        if not dim:
            evaluate(values_for(np.zeros(0), lam))
            history.append((lam, evaluate.best_rate))
            continue
        scale = max(evaluate.best_rate, 1e-30)
        initial = starts + [rng.random(dim) for _ in range(restarts)]
        for z0 in initial:
            if evaluate.evaluations >= budget:
                break
            minimize(lambda z: -evaluate(values_for(z, lam)) / scale, z0, method='Nelder-Mead',
                     options={'maxfev': per_run, 'xatol': 1e-4, 'fatol': 1e-6})
        history.append((lam, evaluate.best_rate))
        logger.info("λ=%.4g: best R so far %.4g after %d evaluations", lam, evaluate.best_rate, evaluate.evaluations)

    if evaluate.best_params is None:
        raise ParameterError("empty feasible region: no candidate satisfies the parameter constraints")
    logger.info("✅ Optimization finished: R=%.4g (%d evaluations)", evaluate.best_rate, evaluate.evaluations)
    return OptimizationResult(params=evaluate.best_params, rate=max(evaluate.best_rate, 0.0),
                              evaluations=evaluate.evaluations, history=history)


# ============================================================================
# SWEEPS
# ============================================================================

def channel_at_distance(channel: ChannelModel, distance_km: float, symmetric: bool = False) -> ChannelModel:
    """Same link scaled to a new total length (arm ratio kept unless symmetric)."""
    if distance_km < 0:
        raise ParameterError("distance must be non-negative")
    total = channel.l_ac + channel.l_bc
    share = 0.5 if symmetric or total == 0 else channel.l_ac / total
    return channel.with_values(l_ac=distance_km * share, l_bc=distance_km * (1 - share))


def matched_rate_channel(channel: ChannelModel, factor: float) -> ChannelModel:
    """Link whose herald rates are all `factor` times higher, with their ratios kept.

    Both arms are shortened by 10 log10(factor) dB of fibre and the dark-count
    probability is multiplied by `factor`, so QBERs and the pairing statistics
    stay those of the original link while a Monte-Carlo run needs `factor`
    times fewer pulse pairs. Holds while every mean arrival stays well below 1.

    Raises:
        ParameterError: factor below 1, an arm too short to absorb the gain, or
            a dark-count probability pushed to 1 or beyond.
    """
    if factor < 1:
        raise ParameterError(f"rate factor must be at least 1, got {factor}")
    if factor == 1:
        return channel
    gain_db = 10 * np.log10(factor)
    l_ac = channel.l_ac - gain_db / channel.alpha_ac if channel.alpha_ac > 0 else -1.0
    l_bc = channel.l_bc - gain_db / channel.alpha_bc if channel.alpha_bc > 0 else -1.0
    if min(l_ac, l_bc) < 0:
        raise ParameterError(f"a {gain_db:.1f} dB gain exceeds the fibre loss of an arm")
    p_dark = channel.p_dark * factor
    if p_dark >= 1:
        raise ParameterError(f"dark-count probability {p_dark:.3g} after scaling is not below 1")
    logger.debug("Matched-rate link: factor %.4g, arms %.1f / %.1f km", factor, l_ac, l_bc)
    return channel.with_values(l_ac=float(l_ac), l_bc=float(l_bc), p_dark=float(p_dark))


def sweep_distance(channel: ChannelModel, distances: Iterable[float], params: Optional[ProtocolParams] = None,
                   space: Optional[SearchSpace] = None, budget: int = 500, seed: Optional[int] = None,
                   symmetric: bool = False, form: Optional[str] = None) -> pd.DataFrame:
    """Rate and both PLOB bounds along a distance grid.

    With `space` every point is optimized; otherwise `params` is evaluated as is.
    A `note` column flags points where the rate rose with distance.

    Raises:
        ParameterError: empty grid, or neither params nor space given.
    """
    distances = [float(d) for d in distances]
    if not distances:
        raise ParameterError("distance grid is empty")
    if params is None and space is None:
        raise ParameterError("sweep needs fixed params or a search space")

    rows = []
    previous = None
    for distance in distances:
        link = channel_at_distance(channel, distance, symmetric)
        if space is not None:
            best = optimize(space, link, budget=budget, seed=seed, start=params, form=form)
            point, rate = best.params, best.rate
        else:
            point, rate = params, objective(params, link, form)
        absolute, relative = plob_bounds(link)
        note = ''
        if previous is not None and rate > previous * (1 + 1e-9) and rate > 0:
            note = 'rate increased with distance'
            logger.warning("⚠️ Rate increased from %.4g to %.4g at %.1f km", previous, rate, distance)
        previous = rate
        row = {
            'distance_km': distance,
            'l_ac': link.l_ac,
            'l_bc': link.l_bc,
            'loss_db': link.total_loss_db,
            'rate': rate,
            'plob_absolute': absolute,
            'plob_relative': relative,
            'ratio_absolute': rate / absolute if absolute else np.nan,
        }
        row.update({name: getattr(point, name) for name in
                    ('mu_a1', 'mu_b1', 'mu_a2', 'mu_b2', 'eps_a', 'eps_b', 'p_a1', 'p_b1', 'p_a2', 'p_b2', 'lam')})
        row['note'] = note
        rows.append(row)
        logger.info("Distance %.1f km: R=%.4g, PLOB=%.4g", distance, rate, absolute)
    return pd.DataFrame(rows)


def plob_crossing(sweep: pd.DataFrame) -> Optional[float]:
    """Distance where the rate first exceeds the absolute PLOB bound (linear interpolation)."""
    above = (sweep['rate'] > sweep['plob_absolute']).to_numpy()
    for i in range(1, len(sweep)):
        if above[i] and not above[i - 1]:
            d0, d1 = sweep['distance_km'].iloc[i - 1], sweep['distance_km'].iloc[i]
            g0 = np.log(sweep['rate'].iloc[i - 1] / sweep['plob_absolute'].iloc[i - 1]) if sweep['rate'].iloc[i - 1] > 0 else -50
            g1 = np.log(sweep['rate'].iloc[i] / sweep['plob_absolute'].iloc[i])
            return float(d0 + (d1 - d0) * (-g0) / (g1 - g0))
    return None
