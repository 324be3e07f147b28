"""JSON/CSV reports, the PDF summary and the sweep chart."""
import json

import pandas as pd
import pytest

from reports.charts import sweep_figure, write_sweep_chart
from reports.pdf import generate_summary_pdf
from reports.writers import (build_metadata, flatten, report_document, write_analysis_reports,
                             write_sweep_csv)


@pytest.fixture(scope='module')
def metadata(published_params):
    return build_metadata(published_params, 'multiplicative', {'b.txt': 'bb', 'a.txt': 'aa'})


@pytest.fixture(scope='module')
def document(published_result, published_tally, published_params, published_channel, metadata):
    return report_document(published_result, published_tally, published_params, published_channel, metadata)


@pytest.fixture
def sweep():
    return pd.DataFrame({
        'distance_km': [300.0, 400.0],
        'rate': [2e-7, 0.0],
        'plob_absolute': [5e-7, 3e-8],
        'plob_relative': [1.4e-7, 8e-9],
    })


class TestDocument:

    def test_sections(self, document):
        for section in ('metadata', 'params', 'channel', 'tally', 'sifted', 'decoy', 'aopp_outcome',
                        'aopp_chain', 'key_rate'):
            assert section in document

    def test_metadata(self, document):
        meta = document['metadata']
        assert meta['chernoff_form'] == 'multiplicative'
        assert 'exp(-d^2 x/(2+d))' in meta['chernoff_description']
        assert list(meta['input_hashes']) == ['a.txt', 'b.txt']
        assert meta['n01_scaled_by'] == 's01'
        assert meta['eps_budget']['eps_sec'] == 1e-10

    def test_inferred_slice_count(self, document):
        tally = document['tally']
        assert tally['x_sent_in_slice_reported'] is False
        assert tally['x_sent_in_slice'] > tally['x_effective']

    def test_json_serialisable(self, document):
        json.dumps(document)

    def test_flatten(self):
        flat = flatten({'a': {'b': 1, 'c': [{'d': 2}, 3]}})
        assert flat == {'a.b': 1, 'a.c.0.d': 2, 'a.c.1': 3}


class TestFiles:

    def test_reports_are_deterministic(self, tmp_path, published_result, published_tally, published_params, published_channel,
                                       metadata):
        args = (published_result, published_tally, published_params, published_channel, metadata)
        _, json_a, csv_a = write_analysis_reports(*args, tmp_path / 'a', stem='replay')
        _, json_b, csv_b = write_analysis_reports(*args, tmp_path / 'b', stem='replay')
        assert json_a.read_bytes() == json_b.read_bytes()
        assert csv_a.read_bytes() == csv_b.read_bytes()
        assert json.loads(json_a.read_text())['key_rate']['rate_per_pulse'] > 0

    def test_csv_is_name_value(self, tmp_path, published_result, published_tally, published_params, published_channel, metadata):
        _, _, csv_path = write_analysis_reports(published_result, published_tally, published_params, published_channel,
                                                metadata, tmp_path)
        table = pd.read_csv(csv_path)
        assert list(table.columns) == ['name', 'value']
        assert 'key_rate.rate_per_pulse' in set(table['name'])
        assert list(table['name']) == sorted(table['name'])

    def test_sweep_csv_header(self, tmp_path, sweep, metadata):
        path = write_sweep_csv(sweep, tmp_path / 'sweep.csv', metadata)
        first = path.read_text().splitlines()[0]
        assert first.startswith('# {')
        assert len(pd.read_csv(path, comment='#')) == 2


class TestPdf:

    def test_summary_pdf(self, document):
        pdf = generate_summary_pdf(document)
        assert pdf.getvalue()[:5] == b'%PDF-'

    def test_without_published_column(self, document):
        assert generate_summary_pdf(document, compare_published=False).getvalue()[:5] == b'%PDF-'


class TestChart:

    def test_traces(self, sweep):
        assert len(sweep_figure(sweep).data) == 3
        assert len(sweep_figure(sweep, operating_point=(428.0, 4.8e-8)).data) == 4

    def test_operating_point_is_labelled_as_expected_rate(self, sweep):
        point = sweep_figure(sweep, operating_point=(428.0, 4.7e-8)).data[-1]
        assert point.name == 'Expected rate at published point'
        assert list(point.y) == [4.7e-8]

    def test_zero_rates_not_plotted(self, sweep):
        assert list(sweep_figure(sweep).data[0].x) == [300.0]

    def test_html(self, tmp_path, sweep):
        path = write_sweep_chart(sweep, tmp_path / 'sweep.html')
        assert '<html>' in path.read_text()
