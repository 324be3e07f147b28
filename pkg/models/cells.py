"""
Cell keys: which window and which source each party used for a pulse pair.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

from config.constants import ALICE_LABELS, BOB_LABELS
from core.exceptions import ParameterError


class Window(str, Enum):
    SIGNAL = 'signal'
    DECOY = 'decoy'


class Intensity(str, Enum):
    VACUUM = 'vacuum'
    DECOY = 'decoy'
    SIGNAL = 'signal'


# Per-party (window, intensity) in table order: vacuum-in-Z, vacuum-in-X,
# decoy-level, signal-level
PARTY_SOURCES: Tuple[Tuple[Window, Intensity], ...] = (
    (Window.SIGNAL, Intensity.VACUUM),
    (Window.DECOY, Intensity.VACUUM),
    (Window.DECOY, Intensity.DECOY),
    (Window.SIGNAL, Intensity.SIGNAL),
)

# Source letters o / x / y of the decoy-state formulas
SOURCE_LETTER = {
    Intensity.VACUUM: 'o',
    Intensity.DECOY: 'x',
    Intensity.SIGNAL: 'y',
}


def _check_pair(window, intensity):
    if window == Window.SIGNAL and intensity == Intensity.DECOY:
        raise ParameterError("signal window cannot send a decoy-level pulse")
    if window == Window.DECOY and intensity == Intensity.SIGNAL:
        raise ParameterError("decoy window cannot send a signal-level pulse")


@dataclass(frozen=True)
class CellKey:
    a_window: Window
    a_intensity: Intensity
    b_window: Window
    b_intensity: Intensity

    def __post_init__(self):
        for name in ('a_window', 'b_window'):
            object.__setattr__(self, name, Window(getattr(self, name)))
        for name in ('a_intensity', 'b_intensity'):
            object.__setattr__(self, name, Intensity(getattr(self, name)))
        _check_pair(self.a_window, self.a_intensity)
        _check_pair(self.b_window, self.b_intensity)

    @property
    def code(self) -> int:
        """Cell code 0-15, row order of the sent/gain table."""
        a = PARTY_SOURCES.index((self.a_window, self.a_intensity))
        b = PARTY_SOURCES.index((self.b_window, self.b_intensity))
        return 4 * a + b

    @property
    def label(self) -> str:
        return f"{ALICE_LABELS[self.code // 4]} {BOB_LABELS[self.code % 4]}"

    @property
    def source_pair(self) -> str:
        """Two-letter source pair, e.g. 'xo' for decoy-level Alice, vacuum Bob."""
        return SOURCE_LETTER[self.a_intensity] + SOURCE_LETTER[self.b_intensity]

    @property
    def is_z_window(self) -> bool:
        return self.a_window == Window.SIGNAL and self.b_window == Window.SIGNAL

    @property
    def is_decoy_pair(self) -> bool:
        """Both parties sent decoy-level (phase-announced) pulses."""
        return self.a_intensity == Intensity.DECOY and self.b_intensity == Intensity.DECOY

    @classmethod
    def from_code(cls, code: int) -> 'CellKey':
        if not 0 <= int(code) < 16:
            raise ParameterError(f"cell code {code} outside 0-15")
        a_window, a_intensity = PARTY_SOURCES[int(code) // 4]
        b_window, b_intensity = PARTY_SOURCES[int(code) % 4]
        return cls(a_window, a_intensity, b_window, b_intensity)

    @classmethod
    def from_label(cls, label: str) -> 'CellKey':
        # "Z_AO Z_BO" and "Z_AOZ_BO" are both accepted
        joined = ''.join(str(label).split())
        for code in range(16):
            a, b = ALICE_LABELS[code // 4], BOB_LABELS[code % 4]
            if joined == a + b:
                return cls.from_code(code)
        raise ParameterError(f"unknown cell label '{label}'")


ALL_CELLS: Tuple[CellKey, ...] = tuple(CellKey.from_code(c) for c in range(16))
