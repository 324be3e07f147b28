"""
Twin-field link model: coherent-state interference at Charlie's beam splitter,
dark counts, misalignment, relative phase drift and reference-pulse phase
estimation.

Two modes share the same click model:

* closed form (`detector_rates`, `expected_tally`): phase-averaged expectations;
* Monte Carlo (`simulate_events`): one row per pulse pair, drawn from a
  counter-based Philox stream so that any partition of the index range
  produces identical rows.
"""
import logging
import math
from typing import Iterator, Optional, Tuple

import numpy as np

from config.settings import config
from core.exceptions import InsufficientCountsError, ParameterError
from core.params import cell_probabilities
from models.cells import ALL_CELLS, Intensity
from models.events import EventBatch, PhaseEstimate
from models.params import ChannelModel, ProtocolParams
from models.tally import SourceTally

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

# Gauss-Legendre nodes for phase averages
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)

# Philox counter regions: pulse blocks use block << 128; the auxiliary
# streams sit above every block index.
_DRIFT_REGION = 1 << 255
_REFERENCE_REGION = 3 << 254

DRIFT_MODELS = ('wiener', 'linear')


# ============================================================================
# CLICK MODEL
# ============================================================================

def arrival_means(mu_a, mu_b, channel: ChannelModel):
    """Mean detected photon numbers x_a, x_b at Charlie (after loss and eta_d)."""
    if np.any(np.asarray(mu_a) < 0) or np.any(np.asarray(mu_b) < 0):
        raise ParameterError("intensities must be non-negative")
    x_a = np.asarray(mu_a, dtype=float) * channel.eta_a * channel.eta_d
    x_b = np.asarray(mu_b, dtype=float) * channel.eta_b * channel.eta_d
    return x_a, x_b


def _branch_means(x_a, x_b, dphi, sign):
    common = (x_a + x_b) / 2
    interference = sign * np.sqrt(x_a * x_b) * np.cos(dphi)
    # clip rounding noise when x_a == x_b and the pulse is fully destructive
    return np.maximum(common + interference, 0.0), np.maximum(common - interference, 0.0)


def _click(mean, p_dark):
    return 1 - (1 - p_dark) * np.exp(-mean)


def detector_rates(mu_a, mu_b, dphi, channel: ChannelModel) -> Tuple[float, float]:
    """Click probabilities (left, right) for one pulse pair.

    The right detector sees (x_a + x_b + 2 sqrt(x_a x_b) cos dphi) / 2 photons on
    average, the left one the same with -cos. With probability e_dx the sign of
    the interference term is swapped.

    Args:
        mu_a, mu_b: Source intensities (photons/pulse).
        dphi: Relative phase at the beam splitter (rad).
        channel: Link and detector model.

    Returns:
        tuple: (p_click_left, p_click_right)
    """
    x_a, x_b = arrival_means(mu_a, mu_b, channel)
    e = channel.e_dx
    right_ok, left_ok = _branch_means(x_a, x_b, dphi, 1.0)
    p_right = (1 - e) * _click(right_ok, channel.p_dark) + e * _click(left_ok, channel.p_dark)
    p_left = (1 - e) * _click(left_ok, channel.p_dark) + e * _click(right_ok, channel.p_dark)
    return _out(p_left), _out(p_right)


def heralded_rates(mu_a, mu_b, dphi, channel: ChannelModel):
    """Probabilities that only the left / only the right detector clicks."""
    x_a, x_b = arrival_means(mu_a, mu_b, channel)
    e, pd = channel.e_dx, channel.p_dark
    right, left = _branch_means(x_a, x_b, dphi, 1.0)
    p_r, p_l = _click(right, pd), _click(left, pd)
    only_right = (1 - e) * p_r * (1 - p_l) + e * p_l * (1 - p_r)
    only_left = (1 - e) * p_l * (1 - p_r) + e * p_r * (1 - p_l)
    return _out(only_left), _out(only_right)


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def phase_averaged_heralded(mu_a, mu_b, channel: ChannelModel, lo=0.0, hi=TWO_PI):
    """Mean (only-left, only-right) probabilities for dphi uniform on [lo, hi]."""
    if hi <= lo:
        return 0.0, 0.0
    phases = (hi - lo) / 2 * _GL_NODES + (hi + lo) / 2
    only_left, only_right = heralded_rates(mu_a, mu_b, phases, channel)
    weights = _GL_WEIGHTS / 2
    return float(np.dot(weights, only_left)), float(np.dot(weights, only_right))


def single_photon_yield(channel: ChannelModel, party: str) -> float:
    """Exact heralding probability of one photon from `party` ('a' or 'b') alone.

    Poisson expansion of the click model with the other arm empty:
    t(1 - p_d) + 2 p_d (1 - p_d)(1 - t), t = arm transmittance times eta_d.
    """
    eta = channel.eta_a if party == 'a' else channel.eta_b
    t = eta * channel.eta_d
    pd = channel.p_dark
    return t * (1 - pd) + 2 * pd * (1 - pd) * (1 - t)


# ============================================================================
# PHASE SLICE
# ============================================================================

def xwindow_postselect(theta_a, theta_b, psi_ab, lam):
    """True where 1 - |cos(theta_a - theta_b - psi_ab)| <= lambda."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    delta = np.mod(np.asarray(theta_a) - np.asarray(theta_b) - np.asarray(psi_ab), TWO_PI)
    accepted = 1 - np.abs(np.cos(delta)) <= lam
    return bool(accepted) if np.ndim(accepted) == 0 else accepted


def slice_acceptance(lam: float) -> float:
    """Fraction of uniformly random relative phases inside the slice: (2/pi) arccos(1 - lambda)."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    return 2 / math.pi * math.acos(1 - lam)


def lambda_for_acceptance(fraction: float) -> float:
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"acceptance fraction must lie in [0, 1], got {fraction}")
    return 1 - math.cos(fraction * math.pi / 2)


def slice_half_width(lam: float) -> float:
    return math.acos(1 - lam)


# ============================================================================
# CLOSED-FORM TALLY
# ============================================================================

def cell_intensities(params: ProtocolParams, cell) -> Tuple[float, float]:
    levels_a = {Intensity.VACUUM: 0.0, Intensity.DECOY: params.mu_a1, Intensity.SIGNAL: params.mu_a2}
    levels_b = {Intensity.VACUUM: 0.0, Intensity.DECOY: params.mu_b1, Intensity.SIGNAL: params.mu_b2}
    return levels_a[cell.a_intensity], levels_b[cell.b_intensity]


def xwindow_rates(params: ProtocolParams, channel: ChannelModel) -> Tuple[float, float]:
    """Per-accepted-pair (effective, error) probabilities in the decoy-decoy cell.

    Assumes the reference phase is known exactly; the slice is symmetric so the
    cos > 0 half (right detector correct) represents both halves.
    """
    if params.lam <= 0:
        return 0.0, 0.0
    half = slice_half_width(params.lam)
    wrong, right = phase_averaged_heralded(params.mu_a1, params.mu_b1, channel, -half, half)
    return wrong + right, wrong


def expected_tally(params: ProtocolParams, channel: ChannelModel, n_total=None) -> SourceTally:
    """Expected sent and heralded counts for all 16 cells.

    Phase-randomised sources are averaged over dphi; the X-window statistics use
    the slice geometry and the misalignment of the channel model.

    Returns:
        SourceTally: float-valued expectations, including x_sent_in_slice and the
        Z-window trailer (n_t, n_t0, n_t1, e_count).
    """
    n = float(params.n_total if n_total is None else n_total)
    sent = cell_probabilities(params) * n
    heralded = np.zeros(16)
    for cell in ALL_CELLS:
        mu_a, mu_b = cell_intensities(params, cell)
        left, right = phase_averaged_heralded(mu_a, mu_b, channel)
        heralded[cell.code] = sent[cell.code] * (left + right)

    decoy_pairs = sent[ALL_CELLS[10].code]
    n_x = decoy_pairs * slice_acceptance(params.lam)
    effective_rate, error_rate = xwindow_rates(params, channel)

    tally = SourceTally(
        sent=sent,
        heralded=heralded,
        x_effective=n_x * effective_rate,
        x_errors=n_x * error_rate,
        x_sent_in_slice=n_x,
    )
    tally.n_t, tally.n_t0, tally.n_t1, tally.e_count = tally.z_window_counts()
    return tally


# ============================================================================
# PHASE DRIFT AND REFERENCE ESTIMATION
# ============================================================================

def estimation_window(channel: ChannelModel, clock_hz=None) -> int:
    """Pulse pairs per phase-estimation interval (t_est in microseconds)."""
    clock = config.CLOCK_HZ if clock_hz is None else clock_hz
    return max(1, int(round(channel.t_est * 1e-6 * clock)))


def drift_at_boundaries(channel: ChannelModel, n_windows: int, seed: int, model=None) -> np.ndarray:
    """Relative phase delta at the start of each estimation window (n_windows + 1 values).

    `linear` advances by drift_rate * t_est per window; `wiener` takes Gaussian
    steps whose RMS over one window equals drift_rate * t_est.
    """
    model = (model or config.DRIFT_MODEL).lower()
    if model not in DRIFT_MODELS:
        raise ParameterError(f"unknown drift model '{model}'")
    step = channel.drift_rate * channel.t_est * 1e-3   # rad/ms * ms
    rng = np.random.Generator(np.random.Philox(key=seed, counter=_DRIFT_REGION))
    start = rng.random() * TWO_PI
    if model == 'linear' or step == 0:
        increments = np.full(n_windows, step)
    else:
        increments = rng.standard_normal(n_windows) * step
    return start + np.concatenate([[0.0], np.cumsum(increments)])


def reference_counts_mean(channel: ChannelModel) -> Tuple[float, float]:
    """(mean counts per reference region per window, interference visibility)."""
    r_a = channel.mu_ref * channel.eta_a * channel.eta_d
    r_b = channel.mu_ref * channel.eta_b * channel.eta_d
    total = r_a + r_b
    pulses = channel.ref_rate_hz * channel.t_est * 1e-6 * channel.ref_region_fraction
    visibility = 2 * math.sqrt(r_a * r_b) / total if total > 0 else 0.0
    return total * pulses, visibility


def sample_reference_counts(channel: ChannelModel, deltas: np.ndarray, seed: int):
    """Poisson reference counts (n1, n2, m1, m2) for each window's mean phase.

    The second region is shifted by a quarter wave so that
    M1 / (M1 + M2) = (1 - sin delta) / 2.
    """
    mean, visibility = reference_counts_mean(channel)
    rng = np.random.Generator(np.random.Philox(key=seed, counter=_REFERENCE_REGION))
    draws = rng.poisson(
        mean * np.stack([
            (1 + visibility * np.cos(deltas)) / 2,
            (1 - visibility * np.cos(deltas)) / 2,
            (1 - visibility * np.sin(deltas)) / 2,
            (1 + visibility * np.sin(deltas)) / 2,
        ], axis=1))
    return draws[:, 0], draws[:, 1], draws[:, 2], draws[:, 3]


def estimate_phase_array(n1, n2, m1, m2) -> np.ndarray:
    """Vectorised relative-phase estimate; NaN where a region has no counts."""
    n1, n2, m1, m2 = (np.asarray(v, dtype=float) for v in (n1, n2, m1, m2))
    with np.errstate(invalid='ignore', divide='ignore'):
        cos_d = np.clip(2 * n1 / (n1 + n2) - 1, -1.0, 1.0)
        sin_d = np.clip(1 - 2 * m1 / (m1 + m2), -1.0, 1.0)
    angle = np.arccos(cos_d)
    delta = np.where(sin_d >= 0, angle, TWO_PI - angle)
    delta = np.where(delta >= TWO_PI, delta - TWO_PI, delta)
    return np.where((n1 + n2 > 0) & (m1 + m2 > 0), delta, np.nan)


def estimate_phase(n1, n2, m1, m2, block_start_index=0) -> PhaseEstimate:
    """Relative phase from the two reference regions.

    Solves N1/(N1+N2) = (1 + cos d)/2 and M1/(M1+M2) = (1 - sin d)/2, taking the
    arccos branch selected by the sign of sin d.

    Raises:
        InsufficientCountsError: either region recorded no counts.
    """
    if min(n1, n2, m1, m2) < 0:
        raise InsufficientCountsError("reference counts must be non-negative")
    if n1 + n2 <= 0 or m1 + m2 <= 0:
        raise InsufficientCountsError("insufficient reference counts")
    delta = float(estimate_phase_array(n1, n2, m1, m2))
    return PhaseEstimate(n1=n1, n2=n2, m1=m1, m2=m2, delta_hat=delta,
                         block_start_index=block_start_index)


def reference_phases(channel: ChannelModel, n_windows: int, seed: int, drift_model=None):
    """True boundary phases and the announced psi_AB for each estimation window.

    psi_AB = -delta_hat so that theta_a - theta_b - psi_AB follows the
    interference phase; windows without counts reuse the previous estimate.
    """
    boundaries = drift_at_boundaries(channel, n_windows, seed, drift_model)
    midpoints = (boundaries[:-1] + boundaries[1:]) / 2
    n1, n2, m1, m2 = sample_reference_counts(channel, np.mod(midpoints, TWO_PI), seed)
    estimates = estimate_phase_array(n1, n2, m1, m2)
    missing = np.isnan(estimates)
    if missing.any():
        logger.warning("⚠️ %d of %d estimation windows had no reference counts", int(missing.sum()), n_windows)
        last = 0.0
        for i in range(n_windows):
            if missing[i]:
                estimates[i] = last
            else:
                last = estimates[i]
    return boundaries, np.mod(-estimates, TWO_PI)


# ============================================================================
# MONTE CARLO
# ============================================================================

def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=block << 128))


def simulate_events(params: ProtocolParams, channel: ChannelModel, n_pairs: int, seed: int,
                    start: int = 0, stop: Optional[int] = None, block_size: Optional[int] = None,
                    drift_model: Optional[str] = None, clock_hz=None) -> Iterator[EventBatch]:
    """Monte-Carlo pulse pairs with global indices in [start, stop).

    Every pulse pair of the protocol run of `n_pairs` is drawn from the block it
    belongs to, so generating [0, n) in one call or as several disjoint ranges
    yields the same rows.

    Args:
        params, channel: Operating point.
        n_pairs: Length of the whole run (defines the drift/reference timeline).
        seed: Non-negative integer key of the Philox streams.
        start, stop: Sub-range to produce (defaults to the whole run).
        block_size: Pulse pairs per RNG block (defaults to config).

    Yields:
        EventBatch: one batch per (partial) block, in index order.
    """
    if n_pairs < 1:
        raise ParameterError("n_pairs must be at least 1")
    if seed < 0:
        raise ParameterError("seed must be non-negative")
    stop = n_pairs if stop is None else min(stop, n_pairs)
    if not 0 <= start <= stop:
        raise ParameterError(f"invalid index range [{start}, {stop})")
    block = int(block_size or config.BLOCK_SIZE)

    window = estimation_window(channel, clock_hz)
    n_windows = (n_pairs + window - 1) // window
    boundaries, psi = reference_phases(channel, n_windows, seed, drift_model)

    cumulative = np.cumsum(cell_probabilities(params))
    cumulative[-1] = 1.0
    mu_a_of = np.array([cell_intensities(params, c)[0] for c in ALL_CELLS])
    mu_b_of = np.array([cell_intensities(params, c)[1] for c in ALL_CELLS])
    pd, e_dx = channel.p_dark, channel.e_dx

    first_block = start // block
    last_block = (stop - 1) // block if stop > start else first_block - 1
    for b in range(first_block, last_block + 1):
        lo = b * block
        hi = min(lo + block, n_pairs)
        size = hi - lo
        rng = _block_rng(seed, b)

        u_cell = rng.random(size)
        theta_a = rng.random(size) * TWO_PI
        theta_b = rng.random(size) * TWO_PI
        u_swap = rng.random(size)
        u_right = rng.random(size)
        u_left = rng.random(size)

        index = np.arange(lo, hi, dtype=np.int64)
        cell = np.searchsorted(cumulative, u_cell, side='right').astype(np.int8)
        cell = np.minimum(cell, 15)

        w = index // window
        frac = (index - w * window) / window
        delta = boundaries[w] + frac * (boundaries[w + 1] - boundaries[w])

        x_a, x_b = arrival_means(mu_a_of[cell], mu_b_of[cell], channel)
        sign = np.where(u_swap < e_dx, -1.0, 1.0)
        n_right, n_left = _branch_means(x_a, x_b, theta_a - theta_b + delta, sign)
        click_right = u_right < _click(n_right, pd)
        click_left = u_left < _click(n_left, pd)

        batch = EventBatch(index=index, cell=cell, theta_a=theta_a, theta_b=theta_b,
                           psi_ab=psi[w], click_left=click_left, click_right=click_right)
        keep = slice(max(start, lo) - lo, min(stop, hi) - lo)
        yield batch[keep]


def simulate_all(params, channel, n_pairs, seed, **kwargs) -> EventBatch:
    """Convenience: the whole run as one batch (small runs and tests)."""
    return EventBatch.concat(simulate_events(params, channel, n_pairs, seed, **kwargs))
