from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from csnpol.core import Comment, Subgroup

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "csnpol" / "data" / "russia_ukraine_30.jsonl"
GOLDEN = Path(__file__).resolve().parent / "golden"
T0 = datetime(2022, 3, 1, tzinfo=timezone.utc)


def make_comment(i, text, likes=0, seconds=None, author=None):
    return Comment(id=f"c{i:03d}", text=text, author=author or f"u{i:03d}", likes=likes,
                   timestamp=T0 + timedelta(seconds=i if seconds is None else seconds), topic="t")


def roster(*labels):
    return [Subgroup(i, label) for i, label in enumerate(labels)]


@pytest.fixture
def fixture_path():
    return FIXTURE


@pytest.fixture
def golden_dir():
    return GOLDEN


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
