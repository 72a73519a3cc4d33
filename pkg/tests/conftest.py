import pytest

CRITERIA: dict = {}


@pytest.fixture
def criterion(capsys):
    """Record and print one ``CRITERION k: PASS/FAIL ...`` line, then assert it."""

    def report(k: int, ok: bool, detail: str):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
        CRITERIA[k] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
