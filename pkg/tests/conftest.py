import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anon_games import EntryGame, load_network  # noqa: E402


@pytest.fixture(scope="session")
def pigou():
    return load_network("pigou")


@pytest.fixture(scope="session")
def braess():
    return load_network("braess")


@pytest.fixture(scope="session")
def grid():
    return load_network("grid3x3")


@pytest.fixture(scope="session")
def entry():
    return EntryGame("standard")


@pytest.fixture(scope="session")
def participation():
    return EntryGame("participation")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
