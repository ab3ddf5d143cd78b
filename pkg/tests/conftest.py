import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def pocket_profile():
    from cubeverse.cayley import bfs_shells
    from cubeverse.pocket import SPEC

    return bfs_shells(SPEC)


@pytest.fixture(scope="session")
def pocket_table():
    from cubeverse.cayley import build_distance_table

    return build_distance_table()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
