"""
Command-line run configuration.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from config.constants import RUN_MODES
from core.exceptions import ParameterError

DATA_DIR = Path(__file__).resolve().parent.parent / 'data'
DEFAULT_PARAMS = DATA_DIR / 'published_params.txt'
DEFAULT_CHANNEL = DATA_DIR / 'published_channel.txt'
DEFAULT_COUNTS = DATA_DIR / 'published_counts.csv'


@dataclass
class RunConfig:
    """One CLI invocation. Paths default to the bundled field-test fixtures."""
    mode: str = 'replay'
    params_path: Path = DEFAULT_PARAMS
    channel_path: Path = DEFAULT_CHANNEL
    counts_path: Path = DEFAULT_COUNTS
    out_dir: Path = Path('output')
    seed: int = 20210101
    n_pairs: int = 10 ** 8
    sweep_from: float = 100.0
    sweep_to: float = 450.0
    sweep_steps: int = 10
    symmetric: bool = False
    chernoff_form: str = 'multiplicative'
    n01_uses_s10: bool = False
    pdf: bool = False
    budget: int = 2000
    events_path: Optional[Path] = None
    distance_km: Optional[float] = None
    rate_factor: float = 1.0
    optimize_each: bool = False
    relative_width: float = 0.2

    def __post_init__(self):
        for name in ('params_path', 'channel_path', 'counts_path', 'out_dir', 'events_path'):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))

    def validate(self):
        """Raise ParameterError for an unusable configuration."""
        if self.mode not in RUN_MODES:
            raise ParameterError(f"unknown mode '{self.mode}' (expected one of {', '.join(RUN_MODES)})")
        required = {'replay': ('params_path', 'counts_path'),
                    'simulate': ('params_path', 'channel_path'),
                    'optimize': ('params_path', 'channel_path'),
                    'sweep': ('params_path', 'channel_path')}[self.mode]
        for name in required:
            path = getattr(self, name)
            if not path.is_file():
                raise ParameterError(f"{name.replace('_path', '')} file not found: {path}")
        if self.mode == 'simulate' and self.n_pairs < 1:
            raise ParameterError("--pairs must be at least 1")
        if self.mode in ('sweep', 'optimize') and self.budget < 1:
            raise ParameterError("--budget must be positive")
        if self.mode == 'sweep':
            if self.sweep_steps < 1:
                raise ParameterError("sweep grid is empty (--sweep-steps must be at least 1)")
            if self.sweep_to < self.sweep_from:
                raise ParameterError("--sweep-to must not be below --sweep-from")
        if self.mode == 'optimize' and not 0 < self.relative_width < 1:
            raise ParameterError("--width must lie in (0, 1)")
        if self.distance_km is not None and self.distance_km < 0:
            raise ParameterError("--distance must be non-negative")
        if self.rate_factor < 1:
            raise ParameterError("--rate-factor must be at least 1")
        if self.seed < 0:
            raise ParameterError("--seed must be non-negative")
