import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Record and immediately print one PASS/FAIL line for an acceptance criterion."""
    def report(criterion: str, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        VERDICTS.append(line)
        with capsys.disabled():
            print(f"\n{line}")
    return report


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
