from pathlib import Path

import numpy as np
import pytest

from scev.core import Partition
from scev.io import make_gaussians

DATA = Path(__file__).parent / "data"

EXAMPLE = {
    "C1": ["1", "1", "3", "2", "2", "3", "3"],
    "C2": ["A", "A", "B", "C", "B", "C", "B"],
    "C3": ["α", "β", "β", "α", "γ", "?", "γ"],
    "C4": ["Z", "Y", "?", "Y", "Z", "Z", "?"],
}
EXAMPLE_CONSENSUS = ["1", "1", "3", "?", "2", "2", "3"]

_criteria: dict[str, list[str]] = {}


@pytest.fixture
def example_path():
    return DATA / "example.csv"


@pytest.fixture
def example():
    return [Partition.from_tokens(col) for col in EXAMPLE.values()]


@pytest.fixture(scope="session")
def blobs():
    """Three well separated 2-D blobs, 20 points each, sigma 0.5."""
    return make_gaussians(20, [[0, 0], [10, 0], [0, 10]], 0.5, rng_seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    label = marker.args[0]
    _criteria.setdefault(label, []).append("PASS" if rep.passed else "FAIL")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test proves")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria):
        results = _criteria[label]
        status = "PASS" if all(r == "PASS" for r in results) else "FAIL"
        terminalreporter.write_line(f"[{status}] {label} ({results.count('PASS')}/{len(results)} checks)")
