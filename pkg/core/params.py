"""
Protocol/channel parameter handling.

Validation, the per-cell sending probabilities, recovery of the window
probabilities from sent counts, and the flat `name = value` parameter files.
"""
import hashlib
import json
import logging
import math
from dataclasses import MISSING, dataclass, fields
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from scipy.optimize import least_squares

from config.constants import PUBLISHED_CHANNEL, PUBLISHED_PROTOCOL
from core.exceptions import ParameterError, UnidentifiableParametersError
from models.cells import ALL_CELLS, CellKey, Intensity, Window
from models.params import ChannelModel, ProtocolParams, ValidationReport

logger = logging.getLogger(__name__)

CONSTRAINT_TOLERANCE = 1e-3

PROBABILITY_FIELDS = ('eps_a', 'eps_b', 'p_a1', 'p_b1', 'p_a2', 'p_b2')
INTENSITY_FIELDS = ('mu_a1', 'mu_b1', 'mu_a2', 'mu_b2')

# file key -> dataclass field
_PARAM_ALIASES = {'lambda': 'lam'}


# ============================================================================
# PUBLISHED OPERATING POINT
# ============================================================================

def field_test_params(**overrides) -> ProtocolParams:
    """Field-test protocol parameters (window probabilities recovered from counts)."""
    values = dict(PUBLISHED_PROTOCOL)
    values.update(overrides)
    return ProtocolParams(**values)


def field_test_channel(**overrides) -> ChannelModel:
    values = dict(PUBLISHED_CHANNEL)
    values.update(overrides)
    return ChannelModel(**values)


# ============================================================================
# SECURITY CONSTRAINT
# ============================================================================

def constraint_sides(params: ProtocolParams) -> Tuple[float, float]:
    """Both sides of the asymmetric security condition (mu_a1/mu_b1 = rhs).

    Raises:
        ParameterError: a denominator vanishes.
    """
    denominator = params.eps_b * (1 - params.eps_a) * params.mu_b2 * math.exp(-params.mu_b2)
    if params.mu_b1 == 0 or denominator == 0:
        raise ParameterError("security constraint undefined (zero denominator)")
    lhs = params.mu_a1 / params.mu_b1
    rhs = (params.eps_a * (1 - params.eps_b) * params.mu_a2 * math.exp(-params.mu_a2)) / denominator
    return lhs, rhs


def constraint_residual(params: ProtocolParams) -> float:
    lhs, rhs = constraint_sides(params)
    if rhs == 0:
        raise ParameterError("security constraint undefined (zero right-hand side)")
    return abs(lhs / rhs - 1)


def solve_mu_b1(params: ProtocolParams) -> float:
    """Bob's decoy intensity that satisfies the security condition exactly."""
    unit_b1 = params.with_values(mu_b1=1.0)
    _, rhs = constraint_sides(unit_b1)
    if rhs <= 0:
        raise ParameterError("security constraint has no positive solution for mu_b1")
    return params.mu_a1 / rhs


# ============================================================================
# VALIDATION
# ============================================================================

def validate(params: ProtocolParams) -> ValidationReport:
    """Check every parameter invariant and report all violations at once.

    Args:
        params: Protocol parameters to check.

    Returns:
        ValidationReport: `ok` is True when nothing is violated; the security
        constraint residual is attached whenever it can be evaluated.
    """
    report = ValidationReport()

    for name in INTENSITY_FIELDS:
        if getattr(params, name) < 0:
            report.add(f"intensity must be non-negative: {name}={getattr(params, name)}")
    if params.mu_a1 >= params.mu_a2:
        report.add("decoy intensity must be strictly below signal intensity (Alice)")
    if params.mu_b1 >= params.mu_b2:
        report.add("decoy intensity must be strictly below signal intensity (Bob)")

    for name in PROBABILITY_FIELDS:
        value = getattr(params, name)
        if not 0.0 <= value <= 1.0:
            report.add(f"probability out of range: {name}={value}")
    if not 0.0 <= params.lam <= 1.0:
        report.add(f"phase-slice parameter out of range: lambda={params.lam}")

    if params.n_total <= 0:
        report.add("n_total must be positive")
    if params.f < 1:
        report.add(f"error-correction efficiency must be >= 1: f={params.f}")
    for name in ('eps_sec', 'eps_cor', 'eps_pa', 'eps_hat', 'eps_rk', 'eps_chernoff'):
        value = getattr(params, name)
        if not 0.0 < value < 1.0:
            report.add(f"failure probability out of range: {name}={value}")

    try:
        residual = constraint_residual(params)
        report.constraint_residual = residual
        if not residual <= CONSTRAINT_TOLERANCE:
            report.add(f"security constraint violated: relative residual {residual:.3e}")
    except ParameterError as e:
        report.add(str(e))

    if not report.ok:
        logger.debug("Parameter validation failed: %s", report.violations)
    return report


def validate_channel(channel: ChannelModel) -> ValidationReport:
    report = ValidationReport()
    for name in ('alpha_ac', 'alpha_bc', 'l_ac', 'l_bc', 'eta_d', 'p_dark', 'e_dx',
                 'drift_rate', 'mu_ref', 't_est'):
        if getattr(channel, name) < 0:
            report.add(f"{name} must be non-negative")
    if channel.eta_d > 1:
        report.add("eta_d must not exceed 1")
    if channel.p_dark > 1:
        report.add("probability out of range: p_dark")
    if channel.e_dx > 0.5:
        report.add("e_dx must not exceed 0.5")
    return report


def require_valid(params: ProtocolParams, channel: ChannelModel = None):
    """Raise ParameterError listing every violation."""
    problems = list(validate(params).violations)
    if channel is not None:
        problems += validate_channel(channel).violations
    if problems:
        raise ParameterError("; ".join(problems))


# ============================================================================
# CELL PROBABILITIES
# ============================================================================

def _party_probability(window, intensity, p_decoy, p_signal_window, eps):
    if window == Window.SIGNAL:
        return p_signal_window * (eps if intensity == Intensity.SIGNAL else 1 - eps)
    return (1 - p_signal_window) * (p_decoy if intensity == Intensity.DECOY else 1 - p_decoy)


def cell_probability(params: ProtocolParams, cell: CellKey) -> float:
    """Probability that a pulse pair lands in `cell`.

    The 16 values sum to 1; e.g. the decoy-window vacuum pair has probability
    (1-p_a2)(1-p_b2)(1-p_a1)(1-p_b1).
    """
    if not isinstance(cell, CellKey):
        raise ParameterError(f"invalid cell: {cell!r}")
    alice = _party_probability(cell.a_window, cell.a_intensity, params.p_a1, params.p_a2, params.eps_a)
    bob = _party_probability(cell.b_window, cell.b_intensity, params.p_b1, params.p_b2, params.eps_b)
    return alice * bob


def cell_probabilities(params: ProtocolParams) -> np.ndarray:
    """All 16 cell probabilities in cell-code order."""
    return np.array([cell_probability(params, cell) for cell in ALL_CELLS])


def expected_sent_counts(params: ProtocolParams, n_total=None) -> np.ndarray:
    n = params.n_total if n_total is None else n_total
    return cell_probabilities(params) * n


# ============================================================================
# WINDOW PROBABILITY RECOVERY
# ============================================================================

@dataclass(frozen=True)
class WindowFit:
    p_a1: float
    p_b1: float
    p_a2: float
    p_b2: float
    eps_a: float
    eps_b: float
    residual: float

    def as_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIT_ORDER = ('p_a1', 'p_b1', 'p_a2', 'p_b2', 'eps_a', 'eps_b')


def _marginal_start(sent: np.ndarray) -> np.ndarray:
    table = sent.reshape(4, 4).astype(float)
    alice = table.sum(axis=1)   # Z_AO, X_AO, X_A1, Z_A
    bob = table.sum(axis=0)
    total = table.sum()
    p_a2 = (alice[0] + alice[3]) / total
    p_b2 = (bob[0] + bob[3]) / total
    eps_a = alice[3] / (alice[0] + alice[3])
    eps_b = bob[3] / (bob[0] + bob[3])
    p_a1 = alice[2] / (alice[1] + alice[2])
    p_b1 = bob[2] / (bob[1] + bob[2])
    return np.array([p_a1, p_b1, p_a2, p_b2, eps_a, eps_b])


def derive_window_probs(sent_counts, n_total=None) -> WindowFit:
    """Recover window/send probabilities from the 16 sent counts.

    Starts from the closed-form marginal ratios (e.g. eps_a from
    Z_A / (Z_AO + Z_A)) and refines by least squares on the relative residuals
    of the 16 product equations.

    Args:
        sent_counts: SourceTally or array of 16 sent counts in cell-code order.
        n_total: Total pulse pairs (defaults to the sum of the counts).

    Returns:
        WindowFit: probabilities plus the largest relative residual.

    Raises:
        UnidentifiableParametersError: a count is non-positive or N is degenerate.
    """
    sent = np.asarray(getattr(sent_counts, 'sent', sent_counts), dtype=float).reshape(16)
    if (sent <= 0).any():
        raise UnidentifiableParametersError("unidentifiable parameters: every sent count must be positive")
    n = float(sent.sum() if n_total is None else n_total)
    if n <= 0:
        raise UnidentifiableParametersError("unidentifiable parameters: non-positive pulse total")

    start = _marginal_start(sent)

    def residuals(x):
        trial = dict(zip(_FIT_ORDER, x))
        candidate = ProtocolParams(mu_a1=0.0, mu_b1=0.0, mu_a2=1.0, mu_b2=1.0, **trial)
        return cell_probabilities(candidate) * n / sent - 1.0

    try:
        result = least_squares(residuals, start, bounds=(0.0, 1.0), xtol=1e-12, ftol=1e-12, gtol=1e-12)
    except ValueError as e:
        raise UnidentifiableParametersError(f"unidentifiable parameters: {e}") from e

    solution = result.x if result.cost <= 0.5 * float(np.sum(residuals(start) ** 2)) else start
    fit = WindowFit(*map(float, solution), residual=float(np.max(np.abs(residuals(solution)))))
    logger.info("Window probabilities recovered (max relative residual %.2e)", fit.residual)
    return fit


# ============================================================================
# PARAMETER FILES
# ============================================================================

def _read_key_values(path, allowed) -> Dict[str, float]:
    values = {}
    text = Path(path).read_text(encoding='utf-8')
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ParameterError(f"expected 'name = value', got '{raw.strip()}'", line=line_no)
        name, value = (part.strip() for part in line.split('=', 1))
        name = _PARAM_ALIASES.get(name, name)
        if name not in allowed:
            raise ParameterError(f"unknown parameter '{name}'", line=line_no)
        try:
            values[name] = float(value)
        except ValueError:
            raise ParameterError(f"value of '{name}' is not a number: '{value}'", line=line_no)
    return values


def _build(cls, values, path):
    required = [f.name for f in fields(cls) if f.default is MISSING and f.default_factory is MISSING]
    missing = [name for name in required if name not in values]
    if missing:
        raise ParameterError(f"{path}: missing parameters: {', '.join(missing)}")
    return cls(**values)


def load_params_file(path) -> ProtocolParams:
    values = _read_key_values(path, {f.name for f in fields(ProtocolParams)})
    return _build(ProtocolParams, values, path)


def load_channel_file(path) -> ChannelModel:
    values = _read_key_values(path, {f.name for f in fields(ChannelModel)})
    return _build(ChannelModel, values, path)


def dump_params_file(obj, path, header=None):
    """Write a ProtocolParams or ChannelModel as `name = value` lines."""
    reverse = {v: k for k, v in _PARAM_ALIASES.items()}
    lines = [f"# {header}"] if header else []
    for f in fields(obj):
        value = getattr(obj, f.name)
        if value is None:
            continue
        lines.append(f"{reverse.get(f.name, f.name)} = {value!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding='utf-8')


def params_hash(*objects) -> str:
    """Stable short SHA-256 over value objects, used in report metadata."""
    payload = json.dumps([o.as_dict() for o in objects], sort_keys=True, default=str)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
