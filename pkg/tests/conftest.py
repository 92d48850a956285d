import json
import pathlib

import pytest

FROZEN_PATH = pathlib.Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(FROZEN_PATH.read_text())


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical experiment")
    config._criterion_lines = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion and fail the test when a check misses."""
    lines = request.config._criterion_lines

    def record(label, checks, **values):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        detail = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        assert ok, f"{label} failed checks {failed}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
