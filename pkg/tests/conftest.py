import os

import pytest

# criterion id -> (title, passed, detail)
_ACCEPTANCE = {}


class AcceptanceRecorder:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, cid, title, passed, detail=""):
        _ACCEPTANCE[cid] = (title, bool(passed), detail)
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


@pytest.fixture(scope="session")
def scale():
    """Sample-size multiplier; 1 (full acceptance scale) unless overridden for quick local runs."""
    return float(os.environ.get("LRFDEV_TEST_SCALE", "1"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c)):
        title, passed, detail = _ACCEPTANCE[cid]
        line = f"criterion {cid:>2} {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
