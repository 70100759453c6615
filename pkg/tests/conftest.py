import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
VERDICTS: dict[int, tuple[str, str]] = {}


def record(n: int, ok: bool | None, detail: str) -> None:
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    VERDICTS[n] = (status, detail)
    print(f"criterion {n}: {status} {detail}")


@pytest.fixture
def verdict():
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        status, detail = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {status} {detail}")
