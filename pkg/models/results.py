"""
Value objects produced by the security analysis.
"""
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from core.exceptions import ParameterError
from models.tally import SiftedKeys


class ChernoffDirection(str, Enum):
    OBSERVED_TO_EXPECTED = 'observed->expected'
    EXPECTED_TO_REAL = 'expected->real'


@dataclass(frozen=True)
class ChernoffConfig:
    """One use of a Chernoff bound: its failure probability, direction and tail pair."""
    failure_prob: float = 1e-10
    direction: ChernoffDirection = ChernoffDirection.EXPECTED_TO_REAL
    form: str = 'multiplicative'

    def __post_init__(self):
        if not 0.0 < self.failure_prob < 1.0:
            raise ParameterError(f"failure_prob must lie in (0, 1), got {self.failure_prob}")


@dataclass
class DecoyEstimates:
    """Expected-value bounds before AOPP.

    `rates` holds the expected counting rates used, keyed like 'S_oo_upper'.
    """
    s01_low: float
    s10_low: float
    s1_low: float
    n10_low: float
    n01_low: float
    e1ph_up: float
    tx_up: Optional[float] = None
    rates: Dict[str, float] = field(default_factory=dict)
    clamps: List[str] = field(default_factory=list)

    @property
    def n1_low(self) -> float:
        return self.n10_low + self.n01_low

    def as_dict(self) -> dict:
        out = asdict(self)
        out['n1_low'] = self.n1_low
        return out


@dataclass
class AoppChain:
    """Intermediates of the AOPP finite-key chain and its outputs."""
    n_g: float
    n_odd: float
    u: float
    n1_low: float
    n10_real: float
    n01_real: float
    n: float
    k: float
    r: float
    M_bar: float
    e_tau: float
    M_bar_s: float
    n1_prime: float
    e1ph_prime: float
    nt_prime: float
    E_prime: float
    n_t: int = 0
    r_iterations: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class KeyRateReport:
    key_length: float
    rate_per_pulse: float
    rate_bps: float
    plob_absolute: float
    plob_relative: float
    ratio_absolute: Optional[float] = None
    ratio_relative: Optional[float] = None
    reason: Optional[str] = None
    terms: Dict[str, float] = field(default_factory=dict)

    @property
    def positive(self) -> bool:
        return self.key_length > 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class AoppOutcome:
    """Result of the pairing step, simulated from bit strings or expected.

    `pairs` holds (bob_zero_position, bob_one_position) rows and `kept` marks
    pairs where Alice's parity was odd; both are None for the expected outcome.
    """
    n_g: float
    n_odd: float
    nt_prime: float
    E_prime: float
    pairs: Optional[np.ndarray] = None
    kept: Optional[np.ndarray] = None

    @property
    def discarded(self) -> float:
        return self.n_g - self.nt_prime


@dataclass
class AnalysisResult:
    """Everything one pass of the security analysis produced."""
    estimates: DecoyEstimates
    sifted: SiftedKeys
    outcome: Optional[AoppOutcome]
    chain: Optional[AoppChain]
    report: KeyRateReport
    chernoff_form: str = 'multiplicative'
    n01_uses_s10: bool = False
