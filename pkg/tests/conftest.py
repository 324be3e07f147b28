"""Shared fixtures: the bundled field-test inputs and their replayed analysis."""
import pytest

from core.analysis import analyze
from core.optimizer import channel_at_distance
from core.params import load_channel_file, load_params_file
from core.tally import load_counts_file
from models.run import DEFAULT_CHANNEL, DEFAULT_COUNTS, DEFAULT_PARAMS


@pytest.fixture(scope='session')
def published_params():
    return load_params_file(DEFAULT_PARAMS)


@pytest.fixture(scope='session')
def published_channel():
    return load_channel_file(DEFAULT_CHANNEL)


@pytest.fixture(scope='session')
def published_tally():
    return load_counts_file(DEFAULT_COUNTS)


@pytest.fixture(scope='session')
def published_result(published_tally, published_params, published_channel):
    return analyze(published_tally, published_params, published_channel)


@pytest.fixture
def counts_text():
    """Text of the bundled counts file, for tests that corrupt it."""
    return DEFAULT_COUNTS.read_text()


@pytest.fixture(scope='session')
def short_channel(published_channel):
    """The field-test link shortened to 20 km, where small Monte-Carlo runs herald plenty of events."""
    return channel_at_distance(published_channel, 20.0)
