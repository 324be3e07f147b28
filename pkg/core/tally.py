"""
Event streams and published tables -> 16-cell SourceTally, Z-window sifting
and X-window error statistics.
"""
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from config.settings import config
from core.exceptions import CountsFormatError, EventFormatError, InsufficientCountsError, ParameterError
from core.optics import xwindow_postselect
from models.cells import ALL_CELLS, CellKey, SOURCE_LETTER
from models.events import EventBatch, PulsePairOutcome
from models.params import ProtocolParams
from models.tally import SiftedKeys, SourceTally

logger = logging.getLogger(__name__)

DECOY_PAIR = 10
Z_CELLS = (0, 3, 12, 15)

COUNTS_COLUMNS = ('cell', 'sent', 'gain')
TRAILER_KEYS = ('x_effective', 'x_errors', 'x_sent_in_slice', 'n_t', 'n_t0', 'n_t1', 'e_count')
REQUIRED_TRAILER = ('x_effective', 'x_errors')

EVENT_COLUMNS = ('timestamp_index', 'cell_code', 'side', 'theta_a', 'theta_b', 'psi_ab')

Events = Union[EventBatch, Iterable[Union[EventBatch, PulsePairOutcome]]]


# ============================================================================
# STREAM HELPERS
# ============================================================================

def iter_batches(events: Events) -> Iterable[EventBatch]:
    """Normalise a batch, an iterable of batches, or an iterable of rows."""
    if isinstance(events, EventBatch):
        yield events
        return
    pending = []
    for item in events:
        if isinstance(item, EventBatch):
            if pending:
                yield EventBatch.from_outcomes(pending)
                pending = []
            yield item
        elif isinstance(item, PulsePairOutcome):
            pending.append(item)
        else:
            raise EventFormatError(f"unexpected record type {type(item).__name__}")
    if pending:
        yield EventBatch.from_outcomes(pending)


def _check_batch(batch: EventBatch):
    bad_cell = (batch.cell < 0) | (batch.cell > 15)
    bad_phase = ~(np.isfinite(batch.theta_a) & np.isfinite(batch.theta_b) & np.isfinite(batch.psi_ab))
    bad = np.flatnonzero(bad_cell | bad_phase)
    if bad.size:
        i = bad[0]
        reason = "cell code outside 0-15" if bad_cell[i] else "non-finite phase"
        raise EventFormatError(reason, index=int(batch.index[i]))


def correct_side_is_right(theta_a, theta_b, psi_ab):
    """Right detector is the correct one where cos(theta_a - theta_b - psi_ab) > 0."""
    return np.cos(np.asarray(theta_a) - np.asarray(theta_b) - np.asarray(psi_ab)) > 0


# ============================================================================
# ACCUMULATION
# ============================================================================

def accumulate_batch(batch: EventBatch, lam: float) -> SourceTally:
    """Tally one batch of pulse pairs."""
    _check_batch(batch)
    cells = batch.cell.astype(np.int64)
    heralded = batch.heralded
    sent = np.bincount(cells, minlength=16).astype(np.int64)
    gains = np.bincount(cells[heralded], minlength=16).astype(np.int64)

    decoy = cells == DECOY_PAIR
    in_slice = decoy & xwindow_postselect(batch.theta_a, batch.theta_b, batch.psi_ab, lam)
    effective = in_slice & heralded
    right_correct = correct_side_is_right(batch.theta_a, batch.theta_b, batch.psi_ab)
    errors = effective & np.where(right_correct, batch.click_left, batch.click_right)

    tally = SourceTally(
        sent=sent,
        heralded=gains,
        x_effective=int(effective.sum()),
        x_errors=int(errors.sum()),
        x_sent_in_slice=int(in_slice.sum()),
    )
    tally.n_t, tally.n_t0, tally.n_t1, tally.e_count = tally.z_window_counts()
    return tally


def accumulate(events: Events, params: ProtocolParams) -> SourceTally:
    """Per-cell sent/heralded counts and X-window statistics of an event stream.

    Args:
        events: EventBatch, iterable of batches, or iterable of PulsePairOutcome.
        params: Supplies the phase-slice parameter lambda.

    Returns:
        SourceTally: integer counts; an empty stream gives the all-zero tally.

    Raises:
        EventFormatError: a record has a bad cell code or phase.
    """
    total = SourceTally(x_sent_in_slice=0, n_t=0, n_t0=0, n_t1=0, e_count=0)
    for batch in iter_batches(events):
        if len(batch):
            total = total.merge(accumulate_batch(batch, params.lam))
    return total


# ============================================================================
# Z-WINDOW SIFTING
# ============================================================================

def z_bits(cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Alice's bit 1 = she sent; Bob's bit 1 = he did not send."""
    alice_sent = cells // 4 == 3
    bob_silent = cells % 4 == 0
    return alice_sent.astype(np.uint8), bob_silent.astype(np.uint8)


class ZSifter:
    """Incremental Z-window sifting over a stream of batches.

    Bit strings are kept while the sifted length stays within `string_cap`
    (config.STRING_CAP by default); beyond it only the statistics survive.
    """

    def __init__(self, string_cap: Optional[int] = None):
        self.cap = config.STRING_CAP if string_cap is None else string_cap
        self.n_t0 = self.n_t1 = self.e_count = self.e_count0 = 0
        self.keep_strings = True
        self._parts_a, self._parts_b = [], []

    def add(self, batch: EventBatch):
        cells = batch.cell.astype(np.int64)
        z = batch.heralded & np.isin(cells, Z_CELLS)
        bits_a, bits_b = z_bits(cells[z])
        self.n_t0 += int((bits_b == 0).sum())
        self.n_t1 += int((bits_b == 1).sum())
        wrong = bits_a != bits_b
        self.e_count += int(wrong.sum())
        self.e_count0 += int((wrong & (bits_b == 0)).sum())
        if self.keep_strings:
            self._parts_a.append(bits_a)
            self._parts_b.append(bits_b)
            if self.n_t0 + self.n_t1 > self.cap:
                logger.warning("⚠️ sifted key exceeds string cap %d; keeping statistics only", self.cap)
                self.keep_strings = False
                self._parts_a, self._parts_b = [], []

    def result(self) -> SiftedKeys:
        z_a = z_b = None
        if self.keep_strings:
            z_a = np.concatenate(self._parts_a) if self._parts_a else np.zeros(0, dtype=np.uint8)
            z_b = np.concatenate(self._parts_b) if self._parts_b else np.zeros(0, dtype=np.uint8)
        return SiftedKeys(n_t=self.n_t0 + self.n_t1, n_t0=self.n_t0, n_t1=self.n_t1, e_count=self.e_count,
                          z_a=z_a, z_b=z_b, e_count0=self.e_count0)


def sift_z(events: Events, params: Optional[ProtocolParams] = None, string_cap: Optional[int] = None) -> SiftedKeys:
    """Z-window effective events as key bits (see ZSifter)."""
    sifter = ZSifter(string_cap)
    for batch in iter_batches(events):
        if len(batch):
            _check_batch(batch)
            sifter.add(batch)
    return sifter.result()


def tally_and_sift(events: Events, params: ProtocolParams,
                   string_cap: Optional[int] = None) -> Tuple[SourceTally, SiftedKeys]:
    """accumulate() and sift_z() in a single pass over the stream."""
    total = SourceTally(x_sent_in_slice=0, n_t=0, n_t0=0, n_t1=0, e_count=0)
    sifter = ZSifter(string_cap)
    for batch in iter_batches(events):
        if not len(batch):
            continue
        total = total.merge(accumulate_batch(batch, params.lam))
        sifter.add(batch)
    return total, sifter.result()


def sifted_from_tally(tally: SourceTally) -> SiftedKeys:
    """Z statistics from the trailer, or from the Z x Z cells when it is absent.

    The split of errors between Bob's 0 and 1 bits always comes from the cells
    (send-send errors sit on bit 0), rescaled to the trailer's e_count.
    """
    n_t, n_t0, n_t1, e_count = tally.z_window_counts()
    send_send = tally.heralded[15].item()
    if None not in (tally.n_t0, tally.n_t1, tally.e_count):
        share = send_send / e_count if e_count else 0.0
        n_t0, n_t1 = tally.n_t0, tally.n_t1
        e_count = tally.e_count
        send_send = min(share * e_count, n_t0)
        if isinstance(e_count, (int, np.integer)):
            send_send = int(round(send_send))
        n_t = n_t0 + n_t1
    return SiftedKeys(n_t=n_t, n_t0=n_t0, n_t1=n_t1, e_count=e_count, e_count0=send_send)


# ============================================================================
# X-WINDOW STATISTICS
# ============================================================================

def estimate_x_sent_in_slice(tally: SourceTally) -> float:
    """N_X, or N_xx' * x_effective / n_xx' when the source did not report it."""
    if tally.x_sent_in_slice is not None:
        return tally.x_sent_in_slice
    gains = tally.heralded[DECOY_PAIR].item()
    if gains <= 0:
        raise InsufficientCountsError("no heralded decoy-decoy events to infer N_X")
    return tally.sent[DECOY_PAIR].item() * tally.x_effective / gains


def x_error_rate(tally: SourceTally) -> Tuple[float, float]:
    """(T_X, QBER_X) = (m_X / N_X, x_errors / x_effective).

    Raises:
        InsufficientCountsError: N_X or x_effective is zero.
    """
    n_x = estimate_x_sent_in_slice(tally)
    if n_x <= 0:
        raise InsufficientCountsError("no decoy-decoy pairs inside the phase slice")
    if tally.x_effective <= 0:
        raise InsufficientCountsError("no effective events in the X window")
    return tally.x_errors / n_x, tally.x_errors / tally.x_effective


def source_pair_counts(tally: SourceTally) -> Dict[str, Tuple[float, float]]:
    """(sent, heralded) per source pair, vacuum pooled over both windows.

    Keys are two letters from o/x/y, e.g. 'ox' = Alice vacuum, Bob decoy-level.
    """
    pooled = {}
    for cell in ALL_CELLS:
        key = SOURCE_LETTER[cell.a_intensity] + SOURCE_LETTER[cell.b_intensity]
        sent, gain = pooled.get(key, (0, 0))
        pooled[key] = (sent + tally.sent[cell.code].item(), gain + tally.heralded[cell.code].item())
    return pooled


def counting_rates(tally: SourceTally) -> Dict[str, float]:
    return {key: (gain / sent if sent else 0.0) for key, (sent, gain) in source_pair_counts(tally).items()}


# ============================================================================
# COUNTS FILE
# ============================================================================

def _parse_trailer(path: Path) -> Dict[str, int]:
    trailer = {}
    for line in path.read_text().splitlines():
        stripped = line.strip()
        if not stripped.startswith('#') or '=' not in stripped:
            continue
        key, _, value = stripped.lstrip('#').partition('=')
        key = key.strip()
        if key not in TRAILER_KEYS:
            continue
        try:
            number = float(value.strip())
        except ValueError:
            raise CountsFormatError(f"trailer value '{value.strip()}' is not a number", column=key)
        if number < 0 or not math.isfinite(number):
            raise CountsFormatError("trailer value must be a non-negative number", column=key)
        trailer[key] = int(number) if number.is_integer() else number
    return trailer


def _count_value(raw, row, column):
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise CountsFormatError(f"'{raw}' is not a count", row=row, column=column)
    if not math.isfinite(value) or not value.is_integer():
        raise CountsFormatError(f"'{raw}' is not a whole count", row=row, column=column)
    if value < 0:
        raise CountsFormatError("negative count", row=row, column=column)
    return int(value)


def load_counts_file(path) -> SourceTally:
    """Parse a sent/gain table with its `# key = value` trailer.

    Raises:
        CountsFormatError: missing column, unknown/duplicate/missing cell,
        non-integer or negative count, or missing trailer entry.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, comment='#', dtype=str, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise CountsFormatError(f"cannot parse counts file: {exc}")
    df.columns = [c.strip().lower() for c in df.columns]
    missing_columns = [c for c in COUNTS_COLUMNS if c not in df.columns]
    if missing_columns:
        raise CountsFormatError("missing required column", column=missing_columns[0])

    sent = np.zeros(16, dtype=np.int64)
    gains = np.zeros(16, dtype=np.int64)
    seen = set()
    for i, record in enumerate(df.itertuples(index=False), start=1):
        try:
            cell = CellKey.from_label(str(record.cell).strip())
        except ParameterError:
            raise CountsFormatError(f"unknown cell label '{record.cell}'", row=i, column='cell')
        if cell.code in seen:
            raise CountsFormatError(f"duplicate cell '{cell.label}'", row=i, column='cell')
        seen.add(cell.code)
        sent[cell.code] = _count_value(record.sent, i, 'sent')
        gains[cell.code] = _count_value(record.gain, i, 'gain')
        if gains[cell.code] > sent[cell.code]:
            raise CountsFormatError("gain exceeds sent", row=i, column='gain')
    if len(seen) != 16:
        absent = [c.label for c in ALL_CELLS if c.code not in seen]
        raise CountsFormatError(f"missing cells: {', '.join(absent)}", column='cell')

    trailer = _parse_trailer(path)
    for key in REQUIRED_TRAILER:
        if key not in trailer:
            raise CountsFormatError("missing trailer entry", column=key)

    tally = SourceTally(sent=sent, heralded=gains, **trailer)
    problems = tally.invariant_violations()
    if problems:
        raise CountsFormatError('; '.join(problems))
    logger.info("✅ Loaded counts for %d cells from %s", len(seen), path.name)
    return tally


def write_counts_file(tally: SourceTally, path, header: Optional[str] = None) -> Path:
    """Write the table in the format `load_counts_file` reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    lines.append(tally.to_frame().to_csv(index=False, lineterminator='\n').rstrip('\n'))
    for key in TRAILER_KEYS:
        value = getattr(tally, key)
        if value is not None:
            lines.append(f"# {key} = {_format_count(value)}")
    path.write_text('\n'.join(lines) + '\n')
    return path


def _format_count(value):
    if isinstance(value, (int, np.integer)) or float(value).is_integer():
        return str(int(value))
    return repr(float(value))


# ============================================================================
# EVENT FILE
# ============================================================================

def write_event_file(path, events: Events, params: ProtocolParams, header: Optional[dict] = None) -> SourceTally:
    """Write heralded events as CSV under a `#` JSON header line.

    The header carries the per-cell sent counts and N_X, so the tally can be
    rebuilt without the silent pulse pairs.

    Returns:
        SourceTally of the written stream.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    total = SourceTally(x_sent_in_slice=0, n_t=0, n_t0=0, n_t1=0, e_count=0)
    frames = []
    for batch in iter_batches(events):
        if not len(batch):
            continue
        total = total.merge(accumulate_batch(batch, params.lam))
        h = batch[batch.heralded]
        frames.append(pd.DataFrame({
            'timestamp_index': h.index,
            'cell_code': h.cell.astype(np.int64),
            'side': np.where(h.click_right, 'R', 'L'),
            'theta_a': h.theta_a,
            'theta_b': h.theta_b,
            'psi_ab': h.psi_ab,
        }))
    meta = dict(header or {})
    meta.update({
        'lambda': params.lam,
        'sent': total.sent.tolist(),
        'x_sent_in_slice': total.x_sent_in_slice,
    })
    body = pd.concat(frames) if frames else pd.DataFrame(columns=list(EVENT_COLUMNS))
    with path.open('w') as handle:
        handle.write('# ' + json.dumps(meta, sort_keys=True) + '\n')
        body.to_csv(handle, index=False, float_format='%.17g', lineterminator='\n')
    logger.info("✅ Wrote %d heralded events to %s", len(body), path.name)
    return total


def read_event_file(path) -> Tuple[dict, EventBatch]:
    """Header dict and the heralded events of an event file.

    Raises:
        EventFormatError: bad header, unknown side, or unparsable record.
    """
    path = Path(path)
    with path.open() as handle:
        first = handle.readline()
        if not first.startswith('#'):
            raise EventFormatError("missing JSON header line")
        try:
            header = json.loads(first[1:])
        except json.JSONDecodeError as exc:
            raise EventFormatError(f"bad header: {exc}")
        df = pd.read_csv(handle)

    missing = [c for c in EVENT_COLUMNS if c not in df.columns]
    if missing:
        raise EventFormatError(f"missing column '{missing[0]}'")
    for i, row in enumerate(df.itertuples(index=False)):
        if row.side not in ('L', 'R'):
            raise EventFormatError(f"side must be L or R, got '{row.side}'", index=i)
    try:
        batch = EventBatch(
            index=df['timestamp_index'].to_numpy(dtype=np.int64),
            cell=df['cell_code'].to_numpy(dtype=np.int8),
            theta_a=df['theta_a'].to_numpy(dtype=float),
            theta_b=df['theta_b'].to_numpy(dtype=float),
            psi_ab=df['psi_ab'].to_numpy(dtype=float),
            click_left=(df['side'] == 'L').to_numpy(),
            click_right=(df['side'] == 'R').to_numpy(),
        )
    except (ValueError, TypeError) as exc:
        raise EventFormatError(f"unparsable record: {exc}")
    _check_batch(batch)
    return header, batch


def tally_from_event_file(path, params: ProtocolParams) -> Tuple[SourceTally, SiftedKeys]:
    """Rebuild the tally and the sifted key from an event file."""
    header, batch = read_event_file(path)
    if 'sent' not in header or len(header['sent']) != 16:
        raise EventFormatError("header lacks the 16 per-cell sent counts")
    heralded = accumulate(batch, params)
    tally = SourceTally(
        sent=np.asarray(header['sent'], dtype=np.int64),
        heralded=heralded.heralded,
        x_effective=heralded.x_effective,
        x_errors=heralded.x_errors,
        x_sent_in_slice=header.get('x_sent_in_slice'),
        n_t=heralded.n_t, n_t0=heralded.n_t0, n_t1=heralded.n_t1, e_count=heralded.e_count,
    )
    return tally, sift_z(batch, params)
