"""
Main entry point for the SNS-TF-QKD key-rate pipeline.
Parses the command line and routes to the replay / simulate / optimize / sweep runs.
"""
import argparse
import logging
import sys
from pathlib import Path

# Add project root to path (parent of app directory)
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np

from config.constants import EXIT_CODES, PUBLISHED_RESULTS, RUN_MODES
from config.settings import config
from core.analysis import analyze
from core.chernoff import FORMS
from core.exceptions import (AnalysisInfeasibleError, CountsFormatError, EventFormatError,
                             ParameterError, UnidentifiableParametersError)
from core.keyrate import plob_bounds
from core.optics import simulate_events
from core.optimizer import channel_at_distance, matched_rate_channel, objective, optimize, plob_crossing, sweep_distance
from core.params import (dump_params_file, file_hash, load_channel_file, load_params_file,
                         params_hash, require_valid)
from core.tally import load_counts_file, tally_and_sift, write_counts_file, write_event_file
from models.run import DEFAULT_CHANNEL, DEFAULT_COUNTS, DEFAULT_PARAMS, RunConfig
from models.search import SearchSpace
from reports.charts import write_sweep_chart
from reports.pdf import write_summary_pdf
from reports.writers import build_metadata, write_analysis_reports, write_json, write_sweep_csv

logger = logging.getLogger(__name__)

INPUT_ERRORS = (ParameterError, CountsFormatError, EventFormatError, UnidentifiableParametersError)


# ============================================================================
# ARGUMENTS
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog='sns-tf-qkd',
        description="Finite-key SNS-TF-QKD analysis with AOPP: replay published counts, "
                    "simulate a link, optimize parameters or sweep distance.",
        epilog="exit codes: 0 success; 2 input error; 3 no positive key. Code 3 is also the clean exit "
               "of a replay whose counts yield no key (for example all-zero gains); the reason is in the report.",
    )
    p.add_argument('--mode', choices=RUN_MODES, default='replay')
    p.add_argument('--params', type=Path, default=DEFAULT_PARAMS, help="Protocol parameter file (name = value).")
    p.add_argument('--channel', type=Path, default=DEFAULT_CHANNEL, help="Channel parameter file (name = value).")
    p.add_argument('--counts', type=Path, default=DEFAULT_COUNTS, help="Per-cell sent/gain table (replay).")
    p.add_argument('--out', type=Path, default=Path(config.OUTPUT_DIR), help="Output directory.")
    p.add_argument('--seed', type=int, default=config.SEED)
    p.add_argument('--pairs', type=int, default=10 ** 8, help="Pulse pairs to simulate.")
    p.add_argument('--events', type=Path, default=None, help="Also write the simulated event stream here.")
    p.add_argument('--distance', type=float, default=None,
                   help="Simulate the channel rescaled to this total length (km); arm ratio kept unless --symmetric.")
    p.add_argument('--rate-factor', type=float, default=1.0,
                   help="Simulate a matched-rate link whose herald rates are this many times higher.")
    p.add_argument('--sweep-from', type=float, default=100.0, help="First total distance (km).")
    p.add_argument('--sweep-to', type=float, default=450.0, help="Last total distance (km).")
    p.add_argument('--sweep-steps', type=int, default=10)
    p.add_argument('--symmetric', action='store_true', help="Split sweep and --distance lengths equally between the arms.")
    p.add_argument('--optimize-each', action='store_true', help="Optimize the parameters at every sweep point.")
    p.add_argument('--budget', type=int, default=2000, help="Objective evaluations per optimization.")
    p.add_argument('--width', type=float, default=0.2, help="Relative half-width of the optimization box.")
    p.add_argument('--chernoff-form', choices=FORMS, default=config.CHERNOFF_FORM)
    p.add_argument('--as-printed-s9', '--n01-uses-s10', dest='n01_uses_s10', action='store_true',
                   help="Scale the single-photon count n01 by s10 instead of s01.")
    p.add_argument('--pdf', action='store_true', help="Also write a one-page PDF summary.")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        mode=args.mode,
        params_path=args.params,
        channel_path=args.channel,
        counts_path=args.counts,
        out_dir=args.out,
        seed=args.seed,
        n_pairs=args.pairs,
        sweep_from=args.sweep_from,
        sweep_to=args.sweep_to,
        sweep_steps=args.sweep_steps,
        symmetric=args.symmetric,
        chernoff_form=args.chernoff_form,
        n01_uses_s10=args.n01_uses_s10,
        pdf=args.pdf,
        budget=args.budget,
        events_path=args.events,
        distance_km=args.distance,
        rate_factor=args.rate_factor,
        optimize_each=args.optimize_each,
        relative_width=args.width,
    )


# ============================================================================
# OUTPUT
# ============================================================================

def _load_channel(cfg: RunConfig):
    if cfg.channel_path is not None and cfg.channel_path.is_file():
        return load_channel_file(cfg.channel_path)
    logger.warning("⚠️ No channel file; PLOB bounds are reported as 0")
    return None


def _hashes(cfg: RunConfig, *names) -> dict:
    hashes = {}
    for name in names:
        path = getattr(cfg, f"{name}_path")
        if path is not None and path.is_file():
            hashes[path.name] = file_hash(path)
    return hashes


def print_analysis_summary(result, title: str):
    """Human-readable digest of one analysis on stdout."""
    est, chain, report = result.estimates, result.chain, result.report
    print("=" * 60)
    print(title)
    print("=" * 60)
    print(f"Sifted Z bits n_t           : {result.sifted.n_t:.6g}")
    print(f"Bit error rate E            : {result.sifted.E:.4%}")
    print(f"Untagged bits n1            : {est.n1_low:.4g}  (published {PUBLISHED_RESULTS['n1']:.3g})")
    print(f"Phase-flip error e1ph       : {est.e1ph_up:.4%}")
    if chain is not None:
        print(f"After AOPP nt'              : {chain.nt_prime:.4g}")
        print(f"After AOPP E'               : {chain.E_prime:.4%}")
        print(f"After AOPP n1'              : {chain.n1_prime:.4g}")
        print(f"After AOPP e1ph'            : {chain.e1ph_prime:.4%}")
    print(f"Key length                  : {report.key_length:.6g} bits")
    print(f"Key rate R                  : {report.rate_per_pulse:.4g} per pulse ({report.rate_bps:.4g} bps)")
    print(f"Absolute / relative PLOB    : {report.plob_absolute:.4g} / {report.plob_relative:.4g}")
    if report.ratio_absolute is not None:
        print(f"R / absolute PLOB           : {report.ratio_absolute:.3f}")
    for clamp in est.clamps:
        print(f"⚠️  clamp: {clamp}")
    if report.reason:
        print(f"❌ zero key: {report.reason}")
    print("=" * 60)


def _write_outputs(cfg: RunConfig, result, tally, params, channel, metadata, stem):
    document, json_path, csv_path = write_analysis_reports(result, tally, params, channel, metadata,
                                                           cfg.out_dir, stem=stem)
    print(f"Reports: {json_path}  {csv_path}")
    if cfg.pdf:
        pdf_path = write_summary_pdf(document, cfg.out_dir / f"{stem}.pdf", compare_published=cfg.mode == 'replay')
        print(f"PDF: {pdf_path}")


# ============================================================================
# RUNS
# ============================================================================

def run_replay(cfg: RunConfig) -> int:
    """Analyze a published sent/gain table. A zero key exits with INFEASIBLE."""
    params = load_params_file(cfg.params_path)
    require_valid(params)
    channel = _load_channel(cfg)
    tally = load_counts_file(cfg.counts_path)

    result = analyze(tally, params, channel, form=cfg.chernoff_form, n01_uses_s10=cfg.n01_uses_s10,
                     seed=cfg.seed)
    metadata = build_metadata(params, cfg.chernoff_form, _hashes(cfg, 'params', 'channel', 'counts'),
                              mode='replay', n01_uses_s10=cfg.n01_uses_s10)
    _write_outputs(cfg, result, tally, params, channel, metadata, 'replay')
    print_analysis_summary(result, "REPLAY OF PUBLISHED COUNTS")
    if not result.report.positive:
        logger.error("❌ Zero key: %s", result.report.reason)
        return EXIT_CODES['INFEASIBLE']
    return EXIT_CODES['OK']


def run_simulate(cfg: RunConfig) -> int:
    """Simulate n_pairs pulse pairs over the channel and analyze the resulting tally."""
    params = load_params_file(cfg.params_path).with_values(n_total=float(cfg.n_pairs))
    channel = load_channel_file(cfg.channel_path)
    if cfg.distance_km is not None:
        channel = channel_at_distance(channel, cfg.distance_km, symmetric=cfg.symmetric)
    channel = matched_rate_channel(channel, cfg.rate_factor)
    require_valid(params, channel)

    def stream():
        return simulate_events(params, channel, cfg.n_pairs, cfg.seed, block_size=config.BLOCK_SIZE)

    logger.info("Simulating %d pulse pairs (seed %d)", cfg.n_pairs, cfg.seed)
    tally, sifted = tally_and_sift(stream(), params)
    if cfg.events_path is not None:
        header = {'seed': cfg.seed, 'n_pairs': cfg.n_pairs, 'params_hash': params_hash(params, channel)}
        write_event_file(cfg.events_path, stream(), params, header=header)
        print(f"Events: {cfg.events_path}")
    counts_path = write_counts_file(tally, cfg.out_dir / 'simulated_counts.csv',
                                    header=f"seed = {cfg.seed}, pairs = {cfg.n_pairs}")

    result = analyze(tally, params, channel, sifted=sifted, form=cfg.chernoff_form,
                     n01_uses_s10=cfg.n01_uses_s10, seed=cfg.seed)
    qber_x = tally.x_errors / tally.x_effective if tally.x_effective else float('nan')
    metadata = build_metadata(params, cfg.chernoff_form, _hashes(cfg, 'params', 'channel'), mode='simulate',
                              n01_uses_s10=cfg.n01_uses_s10,
                              extra={**config.simulation_config, 'seed': cfg.seed, 'n_pairs': cfg.n_pairs,
                                     'distance_km': channel.l_ac + channel.l_bc,
                                     'rate_factor': cfg.rate_factor,
                                     'simulated_qber_x': qber_x})
    _write_outputs(cfg, result, tally, params, channel, metadata, 'simulate')
    print(f"Counts: {counts_path}")
    print(f"Simulated X-window QBER     : {qber_x:.4%}")
    print_analysis_summary(result, f"SIMULATION AT {channel.l_ac + channel.l_bc:.0f} KM")
    return EXIT_CODES['OK']


def run_optimize(cfg: RunConfig) -> int:
    """Search a box around the given parameters for the best finite-key rate."""
    params = load_params_file(cfg.params_path)
    channel = load_channel_file(cfg.channel_path)
    require_valid(params, channel)
    space = SearchSpace.around(params, relative_width=cfg.relative_width)

    baseline = objective(params, channel, cfg.chernoff_form)
    best = optimize(space, channel, budget=cfg.budget, seed=cfg.seed, start=params, form=cfg.chernoff_form)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    params_path = cfg.out_dir / 'optimized_params.txt'
    dump_params_file(best.params, params_path, header=f"optimized: R = {best.rate:.6g} per pulse")
    metadata = build_metadata(best.params, cfg.chernoff_form, _hashes(cfg, 'params', 'channel'), mode='optimize',
                              extra={'seed': cfg.seed, 'budget': cfg.budget, 'relative_width': cfg.relative_width})
    absolute, relative = plob_bounds(channel)
    write_json({
        'metadata': metadata,
        'baseline_rate': baseline,
        'rate': best.rate,
        'evaluations': best.evaluations,
        'params': best.params.as_dict(),
        'plob_absolute': absolute,
        'plob_relative': relative,
        'history': [{'lambda': lam, 'best_rate': rate} for lam, rate in best.history],
    }, cfg.out_dir / 'optimize.json')

    print("=" * 60)
    print("PARAMETER OPTIMIZATION")
    print("=" * 60)
    print(f"Starting point R            : {baseline:.4g}")
    print(f"Optimized R                 : {best.rate:.4g} ({best.evaluations} evaluations)")
    print(f"Absolute PLOB               : {absolute:.4g}")
    print(f"Parameters                  : {params_path}")
    if best.rate <= 0:
        print("❌ no positive key rate inside the search box")
        return EXIT_CODES['INFEASIBLE']
    return EXIT_CODES['OK']


def run_sweep(cfg: RunConfig) -> int:
    """Rate against total distance, with both PLOB bounds, as CSV and HTML chart."""
    params = load_params_file(cfg.params_path)
    channel = load_channel_file(cfg.channel_path)
    require_valid(params, channel)
    distances = np.linspace(cfg.sweep_from, cfg.sweep_to, cfg.sweep_steps)
    space = SearchSpace.around(params, relative_width=cfg.relative_width) if cfg.optimize_each else None

    sweep = sweep_distance(channel, distances, params=params, space=space, budget=cfg.budget, seed=cfg.seed,
                           symmetric=cfg.symmetric, form=cfg.chernoff_form)
    metadata = build_metadata(params, cfg.chernoff_form, _hashes(cfg, 'params', 'channel'), mode='sweep',
                              extra={'symmetric': cfg.symmetric, 'optimize_each': cfg.optimize_each})
    csv_path = write_sweep_csv(sweep, cfg.out_dir / 'sweep.csv', metadata)
    expected_point = (channel.l_ac + channel.l_bc, objective(params, channel, cfg.chernoff_form))
    chart_path = write_sweep_chart(sweep, cfg.out_dir / 'sweep.html', operating_point=expected_point)

    crossing = plob_crossing(sweep)
    print("=" * 60)
    print("DISTANCE SWEEP")
    print("=" * 60)
    print(sweep[['distance_km', 'rate', 'plob_absolute', 'ratio_absolute']].to_string(index=False))
    if crossing is not None:
        print(f"Rate exceeds the absolute PLOB bound beyond ~{crossing:.0f} km")
    print(f"Sweep: {csv_path}  Chart: {chart_path}")
    return EXIT_CODES['OK']


RUNNERS = {
    'replay': run_replay,
    'simulate': run_simulate,
    'optimize': run_optimize,
    'sweep': run_sweep,
}


def main(argv=None) -> int:
    """Run one CLI invocation and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=config.LOG_LEVEL, format='%(levelname)s %(name)s: %(message)s')
    cfg = config_from_args(args)
    try:
        cfg.validate()
        return RUNNERS[cfg.mode](cfg)
    except INPUT_ERRORS as e:
        logger.error("❌ %s", e)
        print(f"❌ Input error: {e}", file=sys.stderr)
        return EXIT_CODES['INPUT_ERROR']
    except AnalysisInfeasibleError as e:
        logger.error("❌ %s", e)
        print(f"❌ Analysis infeasible: {e}", file=sys.stderr)
        return EXIT_CODES['INFEASIBLE']


if __name__ == "__main__":
    sys.exit(main())
