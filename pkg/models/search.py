"""
Optimizer search space and results.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import ParameterError
from models.params import ProtocolParams

# mu_b1 is not searched: it follows from the security constraint
SEARCH_FIELDS = ('mu_a1', 'mu_a2', 'mu_b2', 'eps_a', 'eps_b', 'p_a1', 'p_b1', 'p_a2', 'p_b2', 'lam')


@dataclass(frozen=True)
class ParamRange:
    lower: float
    upper: float
    fixed: bool = False

    def __post_init__(self):
        if self.lower > self.upper:
            raise ParameterError(f"range lower bound {self.lower} exceeds upper bound {self.upper}")

    @classmethod
    def point(cls, value: float) -> 'ParamRange':
        return cls(value, value, fixed=True)

    @property
    def midpoint(self) -> float:
        return (self.lower + self.upper) / 2

    @property
    def is_free(self) -> bool:
        return not self.fixed and self.upper > self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass
class SearchSpace:
    """Box over the protocol parameters; `base` supplies everything not searched.

    Fixed ranges (or zero-width ones) hold their midpoint.
    """
    base: ProtocolParams
    ranges: Dict[str, ParamRange] = field(default_factory=dict)

    def __post_init__(self):
        if 'mu_b1' in self.ranges:
            raise ParameterError("mu_b1 is derived from the security constraint and cannot be searched")
        unknown = set(self.ranges) - set(SEARCH_FIELDS)
        if unknown:
            raise ParameterError(f"unknown search parameters: {', '.join(sorted(unknown))}")
        for name in SEARCH_FIELDS:
            if name not in self.ranges:
                self.ranges[name] = ParamRange.point(getattr(self.base, name))

    @classmethod
    def around(cls, params: ProtocolParams, relative_width: float = 0.2,
               free: Optional[Tuple[str, ...]] = None) -> 'SearchSpace':
        """Box of +-relative_width around `params`, probabilities capped to (0, 1)."""
        free = SEARCH_FIELDS if free is None else free
        ranges = {}
        for name in free:
            value = getattr(params, name)
            lower, upper = value * (1 - relative_width), value * (1 + relative_width)
            if name not in ('mu_a1', 'mu_a2', 'mu_b2'):
                upper = min(upper, 0.999)
            ranges[name] = ParamRange(max(lower, 1e-6), upper)
        return cls(base=params, ranges=ranges)

    @property
    def free_names(self) -> List[str]:
        """Searched by the simplex; lambda is handled by the outer loop."""
        return [n for n in SEARCH_FIELDS if n != 'lam' and self.ranges[n].is_free]

    @property
    def dimension(self) -> int:
        return len(self.free_names)

    def lower_upper(self) -> Tuple[np.ndarray, np.ndarray]:
        names = self.free_names
        return (np.array([self.ranges[n].lower for n in names]),
                np.array([self.ranges[n].upper for n in names]))

    def midpoint_values(self) -> Dict[str, float]:
        return {name: r.midpoint for name, r in self.ranges.items()}

    def contains(self, params: ProtocolParams) -> bool:
        return all(self.ranges[n].contains(getattr(params, n)) for n in SEARCH_FIELDS)


@dataclass
class OptimizationResult:
    params: ProtocolParams
    rate: float
    evaluations: int
    history: List[Tuple[float, float]] = field(default_factory=list)   # (lambda, best rate)
