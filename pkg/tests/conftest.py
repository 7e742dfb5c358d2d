import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gridrisk.ingest import OutageRecord  # noqa: E402

HOUR = 3600


def outage(start_h, restore_h, customers=10, oid=None, **kw):
    """Outage with times given in hours from t = 0."""
    return OutageRecord(id=oid or f"o{start_h}-{restore_h}-{customers}",
                        start=int(round(start_h * HOUR)), restore=int(round(restore_h * HOUR)),
                        customers=customers, **kw)


@pytest.fixture
def make_outage():
    return outage


DATA = Path(__file__).parent / "data"

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: s.split("] ", 1)[1]):
            terminalreporter.write_line(line)
