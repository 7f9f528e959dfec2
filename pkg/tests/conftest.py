import pytest

_LINES: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one pass/fail line per criterion and echo it immediately."""

    def record(criterion: str, ok: bool | None, detail: str) -> None:
        tag = "NOT RUN" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{tag} {criterion}: {detail}"
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
