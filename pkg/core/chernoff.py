"""
Chernoff-bound conversions between expected values and realised counts.

Two directions are used by the finite-key analysis:

* expected -> real: given an expected count x, the realised count lies in
  [phi_L(x), phi_U(x)] except with the configured failure probability;
* observed -> expected: the inverse, bounding the expected value that could
  have produced an observed count.

The default multiplicative pair solves exp(-d^2 x / (2 + d)) = eps (upper tail)
and exp(-d^2 x / 2) = eps (lower tail) for the relative deviation d.
"""
import logging

import numpy as np

from core.exceptions import ParameterError
from models.results import ChernoffConfig, ChernoffDirection

logger = logging.getLogger(__name__)

FORMS = ('multiplicative', 'standard')

DEFAULT_FAILURE_PROB = 1e-10


def describe(form: str = 'multiplicative') -> str:
    """Text recorded in report metadata for the chosen tail pair."""
    _check_form(form)
    if form == 'multiplicative':
        return "multiplicative Chernoff: upper exp(-d^2 x/(2+d)) = eps, lower exp(-d^2 x/2) = eps"
    return "standard Chernoff: upper exp(-d^2 x/3) = eps (d <= 1), lower exp(-d^2 x/2) = eps"


def _check_form(form):
    if form not in FORMS:
        raise ParameterError(f"unknown Chernoff form '{form}' (expected one of {', '.join(FORMS)})")


def _log_term(failure_prob) -> float:
    if not 0.0 < failure_prob < 1.0:
        raise ParameterError(f"failure_prob must lie in (0, 1), got {failure_prob}")
    return float(np.log(1.0 / failure_prob))


def _as_input(x):
    arr = np.asarray(x, dtype=float)
    if (arr < 0).any():
        raise ParameterError("Chernoff bounds need non-negative counts")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


# ============================================================================
# EXPECTED -> REAL
# ============================================================================

def chernoff_upper(x, failure_prob=DEFAULT_FAILURE_PROB, form='multiplicative'):
    """Upper bound phi_U(x) on the realised value of an expected count x."""
    _check_form(form)
    L = _log_term(failure_prob)
    x = _as_input(x)
    multiplicative = x + L / 2 + np.sqrt(L * L / 4 + 2 * L * x)
    if form == 'standard':
        # the d <= 1 simplification is only valid once x >= 3L
        standard = x + np.sqrt(3 * L * x)
        return _out(np.where(x >= 3 * L, standard, multiplicative))
    return _out(multiplicative)


def chernoff_lower(x, failure_prob=DEFAULT_FAILURE_PROB, form='multiplicative'):
    """Lower bound phi_L(x) on the realised value, clamped at zero."""
    _check_form(form)
    L = _log_term(failure_prob)
    x = _as_input(x)
    return _out(np.maximum(x - np.sqrt(2 * L * x), 0.0))


# ============================================================================
# OBSERVED -> EXPECTED
# ============================================================================

def inverse_upper(observed, failure_prob=DEFAULT_FAILURE_PROB, form='multiplicative'):
    """Largest expected value consistent with an observed count.

    Solves phi_L(E) = observed for E.
    """
    _check_form(form)
    L = _log_term(failure_prob)
    x = _as_input(observed)
    return _out(x + L + np.sqrt(L * L + 2 * L * x))


def inverse_lower(observed, failure_prob=DEFAULT_FAILURE_PROB, form='multiplicative'):
    """Smallest expected value consistent with an observed count (>= 0).

    Solves phi_U(E) = observed for E.
    """
    _check_form(form)
    L = _log_term(failure_prob)
    x = _as_input(observed)
    excess = (-L + np.sqrt(L * L + 8 * L * x)) / 2
    result = x - excess
    if form == 'standard':
        root = (-np.sqrt(3 * L) + np.sqrt(3 * L + 4 * x)) / 2
        standard = root ** 2
        result = np.where(standard >= 3 * L, standard, result)
    return _out(np.maximum(result, 0.0))


# ============================================================================
# CONFIGURED USE
# ============================================================================

def lower_bound(x, cfg: ChernoffConfig):
    """Lower end of the interval for `x` in the configured direction."""
    if cfg.direction == ChernoffDirection.OBSERVED_TO_EXPECTED:
        return inverse_lower(x, cfg.failure_prob, cfg.form)
    return chernoff_lower(x, cfg.failure_prob, cfg.form)


def upper_bound(x, cfg: ChernoffConfig):
    if cfg.direction == ChernoffDirection.OBSERVED_TO_EXPECTED:
        return inverse_upper(x, cfg.failure_prob, cfg.form)
    return chernoff_upper(x, cfg.failure_prob, cfg.form)


# ============================================================================
# DIAGNOSTICS
# ============================================================================

def relative_half_width(x, failure_prob=DEFAULT_FAILURE_PROB):
    """Relative width of the lower tail, sqrt(2 ln(1/eps) / x)."""
    L = _log_term(failure_prob)
    return float(np.sqrt(2 * L / x)) if x > 0 else float('inf')


def upper_tail_bound(x, bound) -> float:
    """exp(-d^2 x / (2+d)) for the relative deviation d = bound/x - 1."""
    if x <= 0:
        return 0.0
    d = bound / x - 1
    return float(np.exp(-d * d * x / (2 + d)))


def lower_tail_bound(x, bound) -> float:
    """exp(-d^2 x / 2) for the relative deviation d = 1 - bound/x."""
    if x <= 0:
        return 0.0
    d = 1 - bound / x
    return float(np.exp(-d * d * x / 2))
