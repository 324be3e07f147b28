"""Command-line entry point: modes, outputs and exit codes."""
import json

import pandas as pd
import pytest

import core.analysis
from app.main import build_parser, config_from_args, main
from config.constants import EXIT_CODES
from core.exceptions import ParameterError
from models.run import DEFAULT_COUNTS, RunConfig


class TestReplay:

    def test_published_counts(self, tmp_path, capsys):
        code = main(['--mode', 'replay', '--out', str(tmp_path)])
        assert code == EXIT_CODES['OK']
        report = json.loads((tmp_path / 'replay.json').read_text())
        assert report['key_rate']['rate_per_pulse'] == pytest.approx(4.80e-8, rel=0.10)
        assert (tmp_path / 'replay.csv').is_file()
        assert 'Key rate R' in capsys.readouterr().out

    def test_pdf_flag(self, tmp_path):
        assert main(['--out', str(tmp_path), '--pdf']) == EXIT_CODES['OK']
        assert (tmp_path / 'replay.pdf').read_bytes()[:5] == b'%PDF-'

    def test_alternate_n01_scaling_recorded(self, tmp_path):
        main(['--out', str(tmp_path), '--as-printed-s9'])
        report = json.loads((tmp_path / 'replay.json').read_text())
        assert report['metadata']['n01_scaled_by'] == 's10'

    def test_identical_runs_identical_reports(self, tmp_path):
        main(['--out', str(tmp_path / 'a')])
        main(['--out', str(tmp_path / 'b')])
        assert (tmp_path / 'a' / 'replay.json').read_bytes() == (tmp_path / 'b' / 'replay.json').read_bytes()

    def test_all_zero_gains(self, tmp_path):
        table = pd.read_csv(DEFAULT_COUNTS, comment='#')
        lines = ['cell,sent,gain'] + [f"{row.cell},{row.sent},0" for row in table.itertuples()]
        lines += ['# x_effective = 0', '# x_errors = 0']
        counts = tmp_path / 'zero.csv'
        counts.write_text('\n'.join(lines) + '\n')
        code = main(['--counts', str(counts), '--out', str(tmp_path / 'out')])
        assert code == EXIT_CODES['INFEASIBLE']
        report = json.loads((tmp_path / 'out' / 'replay.json').read_text())
        assert report['key_rate']['reason'] == 'no effective events'
        assert report['key_rate']['rate_per_pulse'] == 0.0


class TestInputErrors:

    def test_missing_counts_file(self, tmp_path):
        assert main(['--counts', str(tmp_path / 'nope.csv'), '--out', str(tmp_path)]) == EXIT_CODES['INPUT_ERROR']

    def test_malformed_counts(self, tmp_path, counts_text, capsys):
        counts = tmp_path / 'bad.csv'
        counts.write_text(counts_text.replace('Z_A Z_B,277529273244,7682102', 'Z_A Z_B,1,7682102'))
        assert main(['--counts', str(counts), '--out', str(tmp_path)]) == EXIT_CODES['INPUT_ERROR']
        assert "column 'gain'" in capsys.readouterr().err

    def test_malformed_params(self, tmp_path):
        params = tmp_path / 'params.txt'
        params.write_text("mu_a1 = 0.042\nbogus = 1\n")
        assert main(['--params', str(params), '--out', str(tmp_path)]) == EXIT_CODES['INPUT_ERROR']

    def test_unknown_mode_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(['--mode', 'teleport'])
        assert exc.value.code == 2

    def test_empty_sweep_grid(self, tmp_path):
        code = main(['--mode', 'sweep', '--sweep-steps', '0', '--out', str(tmp_path)])
        assert code == EXIT_CODES['INPUT_ERROR']


class TestOtherModes:

    def test_simulate_small_run(self, tmp_path):
        events = tmp_path / 'events.csv'
        code = main(['--mode', 'simulate', '--pairs', '50000', '--seed', '3', '--out', str(tmp_path),
                     '--events', str(events)])
        assert code == EXIT_CODES['OK']
        report = json.loads((tmp_path / 'simulate.json').read_text())
        assert report['metadata']['n_pairs'] == 50000
        assert report['key_rate']['key_length'] == 0.0
        assert report['key_rate']['reason']
        assert (tmp_path / 'simulated_counts.csv').is_file()
        assert events.read_text().startswith('# {')

    def test_simulate_at_shorter_distance(self, tmp_path):
        code = main(['--mode', 'simulate', '--pairs', '50000', '--seed', '3', '--distance', '50',
                     '--out', str(tmp_path)])
        assert code == EXIT_CODES['OK']
        report = json.loads((tmp_path / 'simulate.json').read_text())
        assert report['metadata']['distance_km'] == pytest.approx(50.0)
        assert report['channel']['l_ac'] + report['channel']['l_bc'] == pytest.approx(50.0)
        assert report['sifted']['n_t'] > 0

    def test_negative_distance(self, tmp_path):
        code = main(['--mode', 'simulate', '--distance', '-1', '--out', str(tmp_path)])
        assert code == EXIT_CODES['INPUT_ERROR']

    def test_simulate_matched_rate_link(self, tmp_path):
        code = main(['--mode', 'simulate', '--pairs', '50000', '--seed', '3', '--rate-factor', '1000',
                     '--out', str(tmp_path)])
        assert code == EXIT_CODES['OK']
        report = json.loads((tmp_path / 'simulate.json').read_text())
        assert report['metadata']['rate_factor'] == 1000.0
        assert report['channel']['p_dark'] == pytest.approx(2.5e-5)
        assert report['sifted']['n_t'] > 0

    def test_rate_factor_below_one(self, tmp_path):
        code = main(['--mode', 'simulate', '--rate-factor', '0.5', '--out', str(tmp_path)])
        assert code == EXIT_CODES['INPUT_ERROR']

    def test_simulation_is_reproducible(self, tmp_path):
        for name in ('a', 'b'):
            main(['--mode', 'simulate', '--pairs', '20000', '--seed', '5', '--out', str(tmp_path / name)])
        first = (tmp_path / 'a' / 'simulated_counts.csv').read_bytes()
        assert first == (tmp_path / 'b' / 'simulated_counts.csv').read_bytes()

    def test_sweep(self, tmp_path):
        code = main(['--mode', 'sweep', '--sweep-from', '300', '--sweep-to', '450', '--sweep-steps', '4',
                     '--out', str(tmp_path)])
        assert code == EXIT_CODES['OK']
        sweep = pd.read_csv(tmp_path / 'sweep.csv', comment='#')
        assert len(sweep) == 4
        assert {'rate', 'plob_absolute', 'plob_relative'} <= set(sweep.columns)
        assert (tmp_path / 'sweep.html').is_file()

    def test_optimize(self, tmp_path):
        code = main(['--mode', 'optimize', '--budget', '30', '--out', str(tmp_path)])
        assert code == EXIT_CODES['OK']
        result = json.loads((tmp_path / 'optimize.json').read_text())
        assert result['rate'] >= result['baseline_rate'] * 0.99
        assert (tmp_path / 'optimized_params.txt').read_text().startswith('# optimized')


class TestRunConfig:

    def test_parser_defaults(self):
        cfg = config_from_args(build_parser().parse_args([]))
        assert cfg.mode == 'replay'
        assert cfg.counts_path == DEFAULT_COUNTS
        cfg.validate()

    def test_rejects_bad_values(self):
        with pytest.raises(ParameterError):
            RunConfig(mode='simulate', n_pairs=0).validate()
        with pytest.raises(ParameterError):
            RunConfig(mode='sweep', sweep_from=400.0, sweep_to=100.0).validate()
        with pytest.raises(ParameterError):
            RunConfig(seed=-1).validate()
        with pytest.raises(ParameterError):
            RunConfig(mode='warp').validate()


class TestFlags:

    @pytest.mark.parametrize('flag', ['--as-printed-s9', '--n01-uses-s10'])
    def test_n01_scaling_flag_parses(self, flag):
        assert build_parser().parse_args([flag]).n01_uses_s10 is True
        assert build_parser().parse_args([]).n01_uses_s10 is False

    def test_as_printed_flag_reaches_decoy_bounds(self, tmp_path, monkeypatch):
        calls = []
        original = core.analysis.decoy_bounds

        def recording(*args, **kwargs):
            calls.append(kwargs)
            return original(*args, **kwargs)

        monkeypatch.setattr(core.analysis, 'decoy_bounds', recording)
        assert main(['--as-printed-s9', '--out', str(tmp_path)]) == EXIT_CODES['OK']
        assert calls and all(call['n01_uses_s10'] is True for call in calls)

    def test_help_documents_exit_codes(self):
        epilog = build_parser().epilog
        assert '3 no positive key' in epilog
        assert 'all-zero gains' in epilog
