"""
Per-pulse-pair simulation records and reference-pulse phase estimates.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List

import numpy as np

from models.cells import CellKey


@dataclass(frozen=True)
class PulsePairOutcome:
    """One pulse pair: cell, private phases, Charlie's clicks.

    theta_a/theta_b are only meaningful for decoy-level pulses; psi_ab is the
    phase reference announced for the estimation block the pair belongs to.
    """
    timestamp_index: int
    cell: CellKey
    theta_a: float
    theta_b: float
    click_left: bool
    click_right: bool
    psi_ab: float = 0.0

    @property
    def heralded(self) -> bool:
        return self.click_left != self.click_right


@dataclass
class EventBatch:
    """Column-wise block of pulse-pair outcomes (one array entry per pair)."""
    index: np.ndarray
    cell: np.ndarray
    theta_a: np.ndarray
    theta_b: np.ndarray
    psi_ab: np.ndarray
    click_left: np.ndarray
    click_right: np.ndarray

    def __len__(self):
        return int(self.index.shape[0])

    @property
    def heralded(self) -> np.ndarray:
        return self.click_left ^ self.click_right

    def __getitem__(self, selector) -> 'EventBatch':
        return EventBatch(
            index=self.index[selector],
            cell=self.cell[selector],
            theta_a=self.theta_a[selector],
            theta_b=self.theta_b[selector],
            psi_ab=self.psi_ab[selector],
            click_left=self.click_left[selector],
            click_right=self.click_right[selector],
        )

    def rows(self) -> Iterator[PulsePairOutcome]:
        for i in range(len(self)):
            yield PulsePairOutcome(
                timestamp_index=int(self.index[i]),
                cell=CellKey.from_code(int(self.cell[i])),
                theta_a=float(self.theta_a[i]),
                theta_b=float(self.theta_b[i]),
                click_left=bool(self.click_left[i]),
                click_right=bool(self.click_right[i]),
                psi_ab=float(self.psi_ab[i]),
            )

    def to_bytes(self) -> bytes:
        """Canonical byte image, used to compare streams."""
        return b''.join(np.ascontiguousarray(a).tobytes() for a in (
            self.index, self.cell, self.theta_a, self.theta_b, self.psi_ab,
            self.click_left, self.click_right))

    @classmethod
    def empty(cls) -> 'EventBatch':
        return cls(
            index=np.zeros(0, dtype=np.int64),
            cell=np.zeros(0, dtype=np.int8),
            theta_a=np.zeros(0),
            theta_b=np.zeros(0),
            psi_ab=np.zeros(0),
            click_left=np.zeros(0, dtype=bool),
            click_right=np.zeros(0, dtype=bool),
        )

    @classmethod
    def concat(cls, batches: Iterable['EventBatch']) -> 'EventBatch':
        batches = list(batches)
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, name) for b in batches]) for name in (
            'index', 'cell', 'theta_a', 'theta_b', 'psi_ab', 'click_left', 'click_right')))

    @classmethod
    def from_outcomes(cls, outcomes: List[PulsePairOutcome]) -> 'EventBatch':
        if not outcomes:
            return cls.empty()
        return cls(
            index=np.array([o.timestamp_index for o in outcomes], dtype=np.int64),
            cell=np.array([o.cell.code for o in outcomes], dtype=np.int8),
            theta_a=np.array([o.theta_a for o in outcomes], dtype=float),
            theta_b=np.array([o.theta_b for o in outcomes], dtype=float),
            psi_ab=np.array([o.psi_ab for o in outcomes], dtype=float),
            click_left=np.array([o.click_left for o in outcomes], dtype=bool),
            click_right=np.array([o.click_right for o in outcomes], dtype=bool),
        )


@dataclass(frozen=True)
class PhaseEstimate:
    """Reference-region counts of one estimation block and the phase they imply."""
    n1: int
    n2: int
    m1: int
    m2: int
    delta_hat: float = math.nan
    block_start_index: int = 0
