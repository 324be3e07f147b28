"""
Count tables: the 16-cell sent/heralded tally and the sifted Z-window key summary.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from core.exceptions import ParameterError
from models.cells import ALL_CELLS, CellKey


def _zeros():
    return np.zeros(16, dtype=np.int64)


def _as_counts(values) -> np.ndarray:
    """int64 for realised counts, float64 for expectations."""
    arr = np.asarray(values)
    dtype = np.int64 if arr.dtype.kind in "iub" else np.float64
    return arr.astype(dtype).reshape(16)


@dataclass
class SourceTally:
    """Sent and one-detector-heralded counts per cell plus X-window statistics.

    `x_sent_in_slice` is None when the source (e.g. a published table) does not
    report how many decoy-level pairs fell inside the phase slice.
    `n_t`, `n_t0`, `n_t1`, `e_count` are the optional trailer statistics.
    """
    sent: np.ndarray = field(default_factory=_zeros)
    heralded: np.ndarray = field(default_factory=_zeros)
    x_effective: int = 0
    x_errors: int = 0
    x_sent_in_slice: Optional[int] = None
    n_t: Optional[int] = None
    n_t0: Optional[int] = None
    n_t1: Optional[int] = None
    e_count: Optional[int] = None

    def __post_init__(self):
        self.sent = _as_counts(self.sent)
        self.heralded = _as_counts(self.heralded)

    # ------------------------------------------------------------------
    # accessors
    # ------------------------------------------------------------------
    def sent_of(self, cell: CellKey) -> int:
        return self.sent[cell.code].item()

    def heralded_of(self, cell: CellKey) -> int:
        return self.heralded[cell.code].item()

    def rate(self, cell: CellKey) -> float:
        """Counting rate S = n/N of one cell (0 when nothing was sent)."""
        sent = self.sent_of(cell)
        return self.heralded_of(cell) / sent if sent else 0.0

    @property
    def total_sent(self) -> int:
        return self.sent.sum().item()

    @property
    def total_heralded(self) -> int:
        return self.heralded.sum().item()

    def invariant_violations(self):
        """List of broken count invariants (empty when consistent)."""
        problems = []
        for cell in ALL_CELLS:
            if self.heralded_of(cell) > self.sent_of(cell):
                problems.append(f"{cell.label}: heralded exceeds sent")
        if (self.sent < 0).any() or (self.heralded < 0).any():
            problems.append("negative count")
        if self.x_errors > self.x_effective:
            problems.append("x_errors exceeds x_effective")
        decoy = ALL_CELLS[10]
        if self.x_effective > self.heralded_of(decoy):
            problems.append("x_effective exceeds heralded decoy-decoy events")
        return problems

    def z_window_counts(self):
        """(n_t, n_t0, n_t1, e_count) from the four Z x Z cells.

        Bob's bit is 0 when he sent; an error is send-send or notsend-notsend.
        """
        h = self.heralded
        bob_sent = (h[3] + h[15]).item()      # Z_AO Z_B, Z_A Z_B
        bob_silent = (h[0] + h[12]).item()    # Z_AO Z_BO, Z_A Z_BO
        errors = (h[15] + h[0]).item()
        return bob_sent + bob_silent, bob_sent, bob_silent, errors

    # ------------------------------------------------------------------
    # merging
    # ------------------------------------------------------------------
    def merge(self, other: 'SourceTally') -> 'SourceTally':
        """Field-wise sum; optional fields stay None unless both sides have them."""
        def add_optional(a, b):
            return None if a is None or b is None else a + b

        return SourceTally(
            sent=self.sent + other.sent,
            heralded=self.heralded + other.heralded,
            x_effective=self.x_effective + other.x_effective,
            x_errors=self.x_errors + other.x_errors,
            x_sent_in_slice=add_optional(self.x_sent_in_slice, other.x_sent_in_slice),
            n_t=add_optional(self.n_t, other.n_t),
            n_t0=add_optional(self.n_t0, other.n_t0),
            n_t1=add_optional(self.n_t1, other.n_t1),
            e_count=add_optional(self.e_count, other.e_count),
        )

    __add__ = merge

    def __eq__(self, other):
        if not isinstance(other, SourceTally):
            return NotImplemented
        return (
            np.array_equal(self.sent, other.sent)
            and np.array_equal(self.heralded, other.heralded)
            and (self.x_effective, self.x_errors, self.x_sent_in_slice,
                 self.n_t, self.n_t0, self.n_t1, self.e_count)
            == (other.x_effective, other.x_errors, other.x_sent_in_slice,
                other.n_t, other.n_t0, other.n_t1, other.e_count)
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'cell': [c.label for c in ALL_CELLS],
            'sent': self.sent,
            'gain': self.heralded,
        })


@dataclass
class SiftedKeys:
    """Z-window sifted key statistics (Bob's bit 0 = Bob sent)."""
    n_t: int
    n_t0: int
    n_t1: int
    e_count: int
    z_a: Optional[np.ndarray] = None
    z_b: Optional[np.ndarray] = None
    e_count0: Optional[int] = None    # errors among Bob's 0 bits (send-send)

    def __post_init__(self):
        if not math.isclose(self.n_t, self.n_t0 + self.n_t1, rel_tol=1e-12, abs_tol=1e-9):
            raise ParameterError("n_t must equal n_t0 + n_t1")
        if not 0 <= self.e_count <= self.n_t:
            raise ParameterError("e_count must lie in [0, n_t]")

    @property
    def E(self) -> float:
        return self.e_count / self.n_t if self.n_t else 0.0

    @property
    def has_strings(self) -> bool:
        return self.z_a is not None and self.z_b is not None

    @property
    def bit_error_rates(self):
        """(e0, e1): error rates among Bob's 0 bits and 1 bits."""
        if self.e_count0 is None:
            e = self.E
            return e, e
        e0 = self.e_count0 / self.n_t0 if self.n_t0 else 0.0
        e1 = (self.e_count - self.e_count0) / self.n_t1 if self.n_t1 else 0.0
        return e0, e1
