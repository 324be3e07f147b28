"""
Final key length after AOPP and the repeaterless (PLOB) comparators.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from config.settings import config
from models.params import ChannelModel, ProtocolParams
from models.results import AoppChain, KeyRateReport

logger = logging.getLogger(__name__)

MAX_PHASE_ERROR = 0.5


def binary_entropy(x):
    """h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0."""
    arr = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        h = -arr * np.log2(arr) - (1 - arr) * np.log2(1 - arr)
    h = np.where((arr == 0) | (arr == 1), 0.0, h)
    return float(h) if np.ndim(h) == 0 else h


def plob_bounds(channel: ChannelModel) -> Tuple[float, float]:
    """(absolute, relative) repeaterless bounds in bits/pulse.

    absolute = -log2(1 - eta_total); relative also folds in eta_d.
    """
    eta = channel.eta_total
    if eta <= 0:
        return 0.0, 0.0
    absolute = -math.log2(1 - eta) if eta < 1 else math.inf
    relative_eta = eta * channel.eta_d
    relative = -math.log2(1 - relative_eta) if relative_eta < 1 else math.inf
    return absolute, relative


def key_length_terms(chain: AoppChain, params: ProtocolParams) -> dict:
    """The four contributions to the key length (costs as positive numbers)."""
    return {
        'untagged_entropy': chain.n1_prime * (1 - binary_entropy(chain.e1ph_prime)),
        'error_correction': params.f * chain.nt_prime * binary_entropy(chain.E_prime),
        'correctness': 2 * math.log2(2 / params.eps_cor),
        'privacy_amplification': 2 * math.log2(1 / (math.sqrt(2) * params.eps_pa * params.eps_hat)),
    }


def _report(key_length, params, channel, terms, reason, clock_hz, duty):
    rate = key_length / params.n_total if params.n_total else 0.0
    clock = config.CLOCK_HZ if clock_hz is None else clock_hz
    duty = config.DUTY_FACTOR if duty is None else duty
    absolute = relative = 0.0
    if channel is not None:
        absolute, relative = plob_bounds(channel)
    return KeyRateReport(
        key_length=key_length,
        rate_per_pulse=rate,
        rate_bps=rate * clock * duty,
        plob_absolute=absolute,
        plob_relative=relative,
        ratio_absolute=rate / absolute if absolute else None,
        ratio_relative=rate / relative if relative else None,
        reason=reason,
        terms=terms,
    )


def key_rate(chain: Optional[AoppChain], params: ProtocolParams, channel: Optional[ChannelModel] = None,
             clock_hz: Optional[float] = None, duty: Optional[float] = None,
             reason: Optional[str] = None) -> KeyRateReport:
    """Key length n1'(1 - h(e1ph')) - f nt' h(E') - 2 log2(2/eps_cor)
    - 2 log2(1/(sqrt(2) eps_pa eps_hat)), clamped at zero.

    A missing chain (infeasible analysis) yields a zero report carrying `reason`.
    """
    if chain is None:
        return _report(0.0, params, channel, {}, reason or "analysis infeasible", clock_hz, duty)

    terms = key_length_terms(chain, params)
    if chain.n1_prime <= 0:
        return _report(0.0, params, channel, terms, "no untagged bits after AOPP", clock_hz, duty)
    if chain.e1ph_prime > MAX_PHASE_ERROR:
        logger.debug("phase-flip error after AOPP %.4f exceeds 0.5", chain.e1ph_prime)
        return _report(0.0, params, channel, terms,
                       f"phase-flip error after AOPP {chain.e1ph_prime:.4f} exceeds 0.5", clock_hz, duty)

    length = (terms['untagged_entropy'] - terms['error_correction']
              - terms['correctness'] - terms['privacy_amplification'])
    if length <= 0:
        logger.debug("key length %.4g clamped to 0", length)
        return _report(0.0, params, channel, terms,
                       "error-correction and finite-size costs exceed the untagged entropy", clock_hz, duty)
    report = _report(length, params, channel, terms, reason, clock_hz, duty)
    logger.debug("Key length %.6g bits, R = %.4g per pulse", length, report.rate_per_pulse)
    return report
