"""
Actively odd-parity pairing (AOPP): the pairing step itself and the
finite-key chain that carries the decoy bounds through it.
"""
import logging
import math
from typing import Callable, Optional, Union

import numpy as np

from config.settings import config
from core import chernoff
from core.exceptions import AnalysisInfeasibleError, ParameterError
from models.params import ProtocolParams
from models.results import AoppChain, AoppOutcome, ChernoffConfig, ChernoffDirection, DecoyEstimates
from models.tally import SiftedKeys

logger = logging.getLogger(__name__)

R_TOLERANCE = 1e-9
R_MAX_ITERATIONS = 200
R_DAMPING = 0.5

TraceDistance = Union[float, Callable[[float, float], float]]


# ============================================================================
# PAIRING
# ============================================================================

def aopp_simulate(z_a, z_b, seed: Optional[int] = None) -> AoppOutcome:
    """Run the pairing on explicit bit strings.

    Bob pairs his 0 bits with his 1 bits at random; Alice announces each pair's
    parity and only odd pairs survive, one bit each. n_odd comes from a separate
    random grouping of Z_B two by two.

    Raises:
        ParameterError: the strings differ in length.
    """
    z_a = np.asarray(z_a, dtype=np.uint8)
    z_b = np.asarray(z_b, dtype=np.uint8)
    if z_a.shape != z_b.shape:
        raise ParameterError(f"bit strings differ in length ({z_a.size} vs {z_b.size})")
    seed = config.SEED if seed is None else seed
    rng = np.random.Generator(np.random.Philox(key=seed))

    zeros = rng.permutation(np.flatnonzero(z_b == 0))
    ones = rng.permutation(np.flatnonzero(z_b == 1))
    n_g = min(zeros.size, ones.size)
    pairs = np.stack([zeros[:n_g], ones[:n_g]], axis=1)

    alice_odd = (z_a[pairs[:, 0]] ^ z_a[pairs[:, 1]]).astype(bool)
    survivors = pairs[alice_odd]
    # either bit of a surviving pair carries the same error status
    pick = rng.integers(0, 2, size=survivors.shape[0])
    kept_pos = survivors[np.arange(survivors.shape[0]), pick]
    errors = int((z_a[kept_pos] != z_b[kept_pos]).sum())
    nt_prime = int(alice_odd.sum())

    grouping = rng.permutation(z_b.size)
    half = z_b.size // 2
    n_odd = int((z_b[grouping[:half]] != z_b[grouping[half:2 * half]]).sum())

    return AoppOutcome(
        n_g=n_g,
        n_odd=n_odd,
        nt_prime=nt_prime,
        E_prime=errors / nt_prime if nt_prime else 0.0,
        pairs=pairs,
        kept=alice_odd,
    )


def expected_aopp(sifted: SiftedKeys) -> AoppOutcome:
    """Expected pairing statistics from the bit counts and error rates.

    A pair survives when both bits are right or both are wrong; the survivor is
    wrong only in the second case.
    """
    n_g = min(sifted.n_t0, sifted.n_t1)
    n_odd = sifted.n_t0 * sifted.n_t1 / sifted.n_t if sifted.n_t else 0.0
    e0, e1 = sifted.bit_error_rates
    keep = (1 - e0) * (1 - e1) + e0 * e1
    return AoppOutcome(
        n_g=n_g,
        n_odd=n_odd,
        nt_prime=n_g * keep,
        E_prime=e0 * e1 / keep if keep > 0 else 0.0,
    )


# ============================================================================
# FINITE-KEY CHAIN
# ============================================================================

def _trace_distance(eps_rk: TraceDistance, r, k) -> float:
    value = eps_rk(r, k) if callable(eps_rk) else eps_rk
    if not 0.0 < value < 1.0:
        raise ParameterError(f"trace distance eps(r, k) must lie in (0, 1), got {value}")
    return value


def solve_r(n: float, k: float, eps_rk: TraceDistance = 1e-10):
    """Solve r = (2n + k)/k * ln(3k^2 / eps(r, k)) by damped fixed-point iteration.

    Returns:
        tuple: (r, iterations)

    Raises:
        AnalysisInfeasibleError: no convergence within the iteration limit.
    """
    if k <= 0:
        raise AnalysisInfeasibleError("k must be positive to solve for r")
    scale = (2 * n + k) / k

    def step(r):
        return scale * math.log(3 * k * k / _trace_distance(eps_rk, r, k))

    r = scale * math.log(3 * k * k / _trace_distance(eps_rk, 0.0, k))
    for iteration in range(1, R_MAX_ITERATIONS + 1):
        target = step(r)
        if abs(target - r) <= R_TOLERANCE * max(abs(target), 1.0):
            return target, iteration
        r = (1 - R_DAMPING) * r + R_DAMPING * target
    raise AnalysisInfeasibleError(f"r did not converge within {R_MAX_ITERATIONS} iterations")


def aopp_chain(estimates: DecoyEstimates, sifted: SiftedKeys, n_g: float, n_odd: float,
               params: ProtocolParams, outcome: Optional[AoppOutcome] = None,
               form: Optional[str] = None, eps_rk: Optional[TraceDistance] = None) -> AoppChain:
    """Untagged-bit count and phase-flip rate after AOPP.

    Args:
        estimates: Decoy bounds before AOPP.
        sifted: Z-window statistics (n_t, n_t0, n_t1).
        n_g, n_odd: Pairing statistics.
        params: Failure probabilities.
        outcome: nt_prime/E_prime source; the expected outcome when omitted.
        form: Chernoff form (config default).
        eps_rk: Trace distance eps(r, k), constant or callable; params.eps_rk by default.

    Raises:
        ParameterError: n_g exceeds min(n_t0, n_t1) or n_odd is not positive.
        AnalysisInfeasibleError: k <= 0 or 2n - r <= 0.
    """
    form = form or config.CHERNOFF_FORM
    cfg = ChernoffConfig(params.eps_chernoff, ChernoffDirection.EXPECTED_TO_REAL, form)
    eps_rk = params.eps_rk if eps_rk is None else eps_rk
    if n_g > min(sifted.n_t0, sifted.n_t1):
        raise ParameterError("n_g exceeds the smaller bit population of Z_B")
    if n_odd <= 0:
        raise ParameterError("n_odd must be positive")
    if sifted.n_t <= 0:
        raise AnalysisInfeasibleError("no effective events")

    def lower(x):
        return chernoff.lower_bound(max(x, 0.0), cfg)

    def upper(x):
        return chernoff.upper_bound(max(x, 0.0), cfg)

    u = n_g / (2 * n_odd)
    n1_low = lower(estimates.n10_low + estimates.n01_low)
    n10_real = lower(estimates.n10_low)
    n01_real = lower(estimates.n01_low)
    n = lower((n1_low / sifted.n_t) ** 2 * u * sifted.n_t / 2)
    k = u * n1_low - 2 * n
    if k <= 0:
        raise AnalysisInfeasibleError(f"k = {k:.4g} is not positive; too few untagged bits")

    r, iterations = solve_r(n, k, eps_rk)
    M_bar = upper(2 * n * estimates.e1ph_up)
    if 2 * n - r <= 0:
        raise AnalysisInfeasibleError("insufficient statistics for AOPP bound")
    e_tau = min(M_bar / (2 * n - r), 1.0)
    M_bar_s = upper((n - r) * e_tau * (1 - e_tau)) + r

    n1_prime = lower(n01_real / sifted.n_t0 * n10_real / sifted.n_t1 * n_g) if sifted.n_t0 and sifted.n_t1 else 0.0
    e1ph_prime = min(2 * M_bar_s / n1_prime, 1.0) if n1_prime > 0 else 0.5

    outcome = outcome or expected_aopp(sifted)
    chain = AoppChain(
        n_g=n_g, n_odd=n_odd, u=u, n1_low=n1_low,
        n10_real=n10_real, n01_real=n01_real,
        n=n, k=k, r=r, M_bar=M_bar, e_tau=e_tau, M_bar_s=M_bar_s,
        n1_prime=n1_prime, e1ph_prime=e1ph_prime,
        nt_prime=outcome.nt_prime, E_prime=outcome.E_prime,
        n_t=sifted.n_t, r_iterations=iterations,
    )
    logger.debug("AOPP chain: n1'=%.4g e1ph'=%.4f nt'=%.4g E'=%.4f",
                n1_prime, e1ph_prime, outcome.nt_prime, outcome.E_prime)
    return chain
