"""
Decoy-state bounds on the untagged (single-photon) counting rates and the
phase-flip error rate before AOPP.
"""
import logging
import math
from typing import Optional

from config.settings import config
from core import chernoff
from core.exceptions import InsufficientCountsError
from core.tally import estimate_x_sent_in_slice, source_pair_counts
from models.params import ProtocolParams
from models.results import ChernoffConfig, ChernoffDirection, DecoyEstimates
from models.tally import SourceTally

logger = logging.getLogger(__name__)

# phase-flip bound used when the single-photon rate bound vanishes
E1PH_UNDEFINED = 0.5


class _RateBounds:
    """Observed source-pair counts turned into expected counting-rate bounds."""

    def __init__(self, tally: SourceTally, failure_prob: float, form: str, finite: bool):
        self.pairs = source_pair_counts(tally)
        self.cfg = ChernoffConfig(failure_prob, ChernoffDirection.OBSERVED_TO_EXPECTED, form)
        self.finite = finite
        self.used = {}

    def _bound(self, count, sent, upper):
        if sent <= 0:
            return 0.0
        if not self.finite:
            return count / sent
        if upper:
            return chernoff.upper_bound(count, self.cfg) / sent
        return chernoff.lower_bound(count, self.cfg) / sent

    def upper(self, pair: str) -> float:
        sent, count = self.pairs[pair]
        value = self._bound(count, sent, True)
        self.used[f'S_{pair}_upper'] = value
        return value

    def lower(self, pair: str) -> float:
        sent, count = self.pairs[pair]
        value = self._bound(count, sent, False)
        self.used[f'S_{pair}_lower'] = value
        return value


def _single_photon_rate(mu1, mu2, s_decoy_low, s_signal_up, s_vacuum_up):
    numerator = (mu2 ** 2 * math.exp(mu1) * s_decoy_low
                 - mu1 ** 2 * math.exp(mu2) * s_signal_up
                 - (mu2 ** 2 - mu1 ** 2) * s_vacuum_up)
    return numerator / (mu2 * mu1 * (mu2 - mu1))


def decoy_bounds(tally: SourceTally, params: ProtocolParams, form: Optional[str] = None,
                 n01_uses_s10: bool = False, finite: bool = True) -> DecoyEstimates:
    """Lower bounds on s01, s10, s1, n10, n01 and the upper bound on e1ph.

    Observed counts are converted to expected values with the inverse Chernoff
    pair before entering the decoy formulas. The vacuum source of each party is
    pooled over both of its windows.

    Args:
        tally: Sent/heralded counts (integers, or expectations in the optimizer).
        params: Intensities, probabilities and the per-use failure probability.
        form: Chernoff form; config.CHERNOFF_FORM by default.
        n01_uses_s10: Scale n01 by s10 instead of s01.
        finite: False uses observed rates directly (asymptotic limit).

    Returns:
        DecoyEstimates: with the rates used and any clamps applied.
    """
    form = form or config.CHERNOFF_FORM
    rates = _RateBounds(tally, params.eps_chernoff, form, finite)
    clamps = []

    s01 = _single_photon_rate(params.mu_b1, params.mu_b2,
                              rates.lower('ox'), rates.upper('oy'), rates.upper('oo'))
    s10 = _single_photon_rate(params.mu_a1, params.mu_a2,
                              rates.lower('xo'), rates.upper('yo'), rates.upper('oo'))
    if s01 < 0:
        clamps.append(f"s01_low clamped from {s01:.4g} to 0")
        s01 = 0.0
    if s10 < 0:
        clamps.append(f"s10_low clamped from {s10:.4g} to 0")
        s10 = 0.0

    mu_sum = params.mu_a1 + params.mu_b1
    s1 = (params.mu_a1 * s10 + params.mu_b1 * s01) / mu_sum

    z_pairs = params.n_total * params.p_a2 * params.p_b2
    n10 = z_pairs * params.eps_a * (1 - params.eps_b) * params.mu_a2 * math.exp(-params.mu_a2) * s10
    n01_rate = s10 if n01_uses_s10 else s01
    n01 = z_pairs * params.eps_b * (1 - params.eps_a) * params.mu_b2 * math.exp(-params.mu_b2) * n01_rate

    tx_up = _tx_upper(tally, params, form, finite)
    rates.used['T_X_upper'] = tx_up
    s_oo_low = rates.lower('oo')
    attenuation = math.exp(-mu_sum)
    if s1 <= 0 or tx_up is None:
        reason = "s1_low is 0" if s1 <= 0 else "no decoy-decoy statistics in the phase slice"
        clamps.append(f"e1ph_up set to {E1PH_UNDEFINED} because {reason}")
        e1ph = E1PH_UNDEFINED
    else:
        e1ph = (tx_up - attenuation * s_oo_low / 2) / (attenuation * mu_sum * s1)
        if e1ph < 0:
            clamps.append(f"e1ph_up clamped from {e1ph:.4g} to 0")
            e1ph = 0.0
        elif e1ph > 1:
            clamps.append(f"e1ph_up clamped from {e1ph:.4g} to 1")
            e1ph = 1.0

    for message in clamps:
        logger.warning("⚠️ %s (statistical fluctuation)", message)

    estimates = DecoyEstimates(
        s01_low=s01, s10_low=s10, s1_low=s1,
        n10_low=n10, n01_low=n01, e1ph_up=e1ph, tx_up=tx_up,
        rates=rates.used, clamps=clamps,
    )
    logger.debug("Decoy bounds: n1=%.4g e1ph=%.4f (%s Chernoff)", estimates.n1_low, e1ph, form)
    return estimates


def _tx_upper(tally, params, form, finite) -> Optional[float]:
    try:
        n_x = estimate_x_sent_in_slice(tally)
    except InsufficientCountsError:
        return None
    if n_x <= 0:
        return None
    if not finite:
        return tally.x_errors / n_x
    cfg = ChernoffConfig(params.eps_chernoff, ChernoffDirection.OBSERVED_TO_EXPECTED, form)
    return chernoff.upper_bound(tally.x_errors, cfg) / n_x
