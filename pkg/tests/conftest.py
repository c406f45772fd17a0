import numpy as np
import pytest

ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(request):
    """Record one ``CRITERION n: PASS|FAIL`` line and assert on it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number: int, passed: bool, detail: str, info: str = ""):
        line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line + (f"\n               {info}" if info else ""))
        print(line)
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
