import pytest

from src.run_log import set_log_dir
from tests.factories import make_small_records


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long synthetic benchmarks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long synthetic benchmark, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _run_log_in_tmp(tmp_path_factory):
    # keep pipeline.log writes out of the project tree and out of scanned test dirs
    set_log_dir(tmp_path_factory.mktemp("runlog"))
    yield
    set_log_dir(None)


@pytest.fixture
def small_records():
    return make_small_records()
