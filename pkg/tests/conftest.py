import pytest

_acceptance: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(name: str, ok: bool, detail: str):
        _acceptance[name] = (bool(ok), detail)
        print(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s.split("-")[1])):
        ok, detail = _acceptance[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
