"""
JSON / CSV report emission.

Reports are deterministic: they embed input hashes instead of timestamps, and
keys are sorted so identical inputs give identical bytes.
"""
import json
import logging
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd

from config.settings import config
from core import chernoff
from core.tally import counting_rates, estimate_x_sent_in_slice
from core.exceptions import InsufficientCountsError
from models.params import ChannelModel, ProtocolParams
from models.results import AnalysisResult
from models.tally import SourceTally

logger = logging.getLogger(__name__)


def _plain(value):
    """numpy / dataclass values -> JSON-compatible Python objects."""
    if is_dataclass(value) and not isinstance(value, type):
        return _plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):
        return value.value
    return value


def build_metadata(params: ProtocolParams, form: str, input_hashes: Optional[Dict[str, str]] = None,
                   mode: str = 'replay', n01_uses_s10: bool = False, extra: Optional[dict] = None) -> dict:
    meta = {
        'mode': mode,
        'chernoff_form': form,
        'chernoff_description': chernoff.describe(form),
        'eps_budget': {
            'eps_sec': params.eps_sec,
            'eps_cor': params.eps_cor,
            'eps_pa': params.eps_pa,
            'eps_hat': params.eps_hat,
            'eps_rk': params.eps_rk,
            'eps_chernoff_per_use': params.eps_chernoff,
        },
        'n01_scaled_by': 's10' if n01_uses_s10 else 's01',
        'clock_hz': config.CLOCK_HZ,
        'duty_factor': config.DUTY_FACTOR,
        'input_hashes': dict(sorted((input_hashes or {}).items())),
    }
    if extra:
        meta.update(extra)
    return meta


def tally_summary(tally: SourceTally) -> dict:
    try:
        n_x = estimate_x_sent_in_slice(tally)
    except InsufficientCountsError:
        n_x = None
    return {
        'counts': tally.to_frame().to_dict(orient='records'),
        'source_pair_rates': counting_rates(tally),
        'x_effective': tally.x_effective,
        'x_errors': tally.x_errors,
        'x_sent_in_slice': n_x,
        'x_sent_in_slice_reported': tally.x_sent_in_slice is not None,
    }


def report_document(result: AnalysisResult, tally: SourceTally, params: ProtocolParams,
                    channel: Optional[ChannelModel], metadata: dict) -> dict:
    """Every intermediate of one analysis, keyed by section."""
    sifted = result.sifted
    return _plain({
        'metadata': metadata,
        'params': params.as_dict(),
        'channel': channel.as_dict() if channel is not None else None,
        'tally': tally_summary(tally),
        'sifted': {'n_t': sifted.n_t, 'n_t0': sifted.n_t0, 'n_t1': sifted.n_t1,
                   'e_count': sifted.e_count, 'E': sifted.E},
        'decoy': result.estimates.as_dict(),
        'aopp_outcome': None if result.outcome is None else {
            'n_g': result.outcome.n_g, 'n_odd': result.outcome.n_odd,
            'nt_prime': result.outcome.nt_prime, 'E_prime': result.outcome.E_prime,
        },
        'aopp_chain': result.chain.as_dict() if result.chain else None,
        'key_rate': result.report.as_dict(),
    })


def flatten(document: dict, prefix: str = '') -> Dict[str, object]:
    """Nested dict -> {'section.name': value}; lists of records keep their index."""
    flat = {}
    for key, value in document.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + '.'))
        elif isinstance(value, list):
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    flat.update(flatten(item, f"{name}.{i}."))
                else:
                    flat[f"{name}.{i}"] = item
        else:
            flat[name] = value
    return flat


def write_json(document: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
    return path


def write_csv(document: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flat = flatten(document)
    df = pd.DataFrame({'name': list(flat.keys()), 'value': [_csv_value(v) for v in flat.values()]})
    df.sort_values('name').to_csv(path, index=False, lineterminator='\n')
    return path


def _csv_value(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return value


def write_analysis_reports(result: AnalysisResult, tally: SourceTally, params: ProtocolParams,
                           channel: Optional[ChannelModel], metadata: dict, out_dir, stem: str = 'report'):
    """Write `<stem>.json` and `<stem>.csv`; returns (document, json_path, csv_path)."""
    out_dir = Path(out_dir)
    document = report_document(result, tally, params, channel, metadata)
    json_path = write_json(document, out_dir / f"{stem}.json")
    csv_path = write_csv(document, out_dir / f"{stem}.csv")
    logger.info("✅ Reports written to %s", out_dir)
    return document, json_path, csv_path


def write_sweep_csv(sweep: pd.DataFrame, path, metadata: Optional[dict] = None) -> Path:
    """Sweep table with the metadata as `#` header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {json.dumps(_plain(metadata), sort_keys=True)}"] if metadata else []
    lines.append(sweep.to_csv(index=False, lineterminator='\n', float_format='%.10g').rstrip('\n'))
    path.write_text('\n'.join(lines) + '\n')
    return path
