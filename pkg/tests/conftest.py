import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN = Path(__file__).parent / "data" / "golden"


@pytest.fixture
def golden_dir():
    return GOLDEN


@pytest.fixture
def golden_copy(tmp_path):
    """A writable copy of the golden fixture; returns its config path."""
    dest = tmp_path / "golden"
    shutil.copytree(GOLDEN, dest, ignore=shutil.ignore_patterns("out", "expected.json"))
    return dest / "config.yaml"


# filled by the acceptance suite and echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
