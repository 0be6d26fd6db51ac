import os

import pytest

from heegner_heights.asymptotics import constants
from heegner_heights.curve_model import load_curves


def pytest_collection_modifyitems(config, items):
    if os.environ.get("HEEGNER_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set HEEGNER_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def curves():
    return load_curves()


_BUNDLES = {}


@pytest.fixture(scope="session")
def bundle_of(curves):
    """Memoised constant bundles, shared by every test module."""
    def get(label):
        if label not in _BUNDLES:
            _BUNDLES[label] = constants(curves[label])
        return _BUNDLES[label]
    return get


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
