"""
Protocol and channel parameter value objects.
"""
import math
from dataclasses import dataclass, field, asdict, replace
from typing import List, Optional


@dataclass(frozen=True)
class ProtocolParams:
    """Source intensities, window/send probabilities and the security budget.

    `lam` is the phase-slice parameter (the file key is ``lambda``).
    The eps_* fields left as None default to an equal share of eps_sec.
    """
    mu_a1: float
    mu_b1: float
    mu_a2: float
    mu_b2: float
    eps_a: float
    eps_b: float
    p_a1: float
    p_b1: float
    p_a2: float
    p_b2: float
    lam: float = 0.02
    n_total: float = 1e12
    f: float = 1.1
    eps_sec: float = 1e-10
    eps_cor: Optional[float] = None
    eps_pa: Optional[float] = None
    eps_hat: Optional[float] = None
    eps_rk: float = 1e-10
    eps_chernoff: float = 1e-10

    def __post_init__(self):
        for name in ('eps_cor', 'eps_pa', 'eps_hat'):
            if getattr(self, name) is None:
                object.__setattr__(self, name, self.eps_sec)

    def with_values(self, **changes) -> 'ProtocolParams':
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ChannelModel:
    """Per-arm loss, Charlie's detection, noise and phase-drift figures.

    Units: alpha in dB/km, lengths in km, drift_rate in rad/ms,
    mu_ref in photons/pulse, t_est in microseconds.
    """
    alpha_ac: float
    alpha_bc: float
    l_ac: float
    l_bc: float
    eta_d: float
    p_dark: float
    e_dx: float
    drift_rate: float = 0.0
    mu_ref: float = 450.0
    t_est: float = 20.0
    ref_rate_hz: float = 200e6
    ref_region_fraction: float = 0.5

    @property
    def loss_ac_db(self) -> float:
        return self.alpha_ac * self.l_ac

    @property
    def loss_bc_db(self) -> float:
        return self.alpha_bc * self.l_bc

    @property
    def total_loss_db(self) -> float:
        return self.loss_ac_db + self.loss_bc_db

    @property
    def eta_a(self) -> float:
        """Fiber transmittance Alice -> Charlie."""
        return 10 ** (-self.loss_ac_db / 10)

    @property
    def eta_b(self) -> float:
        return 10 ** (-self.loss_bc_db / 10)

    @property
    def eta_total(self) -> float:
        """End-to-end transmittance Alice -> Bob used by the PLOB bound."""
        if math.isinf(self.total_loss_db):
            return 0.0
        return 10 ** (-self.total_loss_db / 10)

    def with_values(self, **changes) -> 'ChannelModel':
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)
    constraint_residual: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str):
        self.violations.append(message)

    def __bool__(self):
        return self.ok
