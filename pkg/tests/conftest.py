import pytest

# Lines recorded by the acceptance suite; echoed in the terminal summary so
# the per-criterion verdicts show up even without ``-s``.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
