import pytest

# criterion number -> list of (ok, detail) from the acceptance module
_RESULTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture(scope="session")
def record():
    def _record(criterion: int, ok: bool, detail: str) -> bool:
        _RESULTS.setdefault(criterion, []).append((bool(ok), detail))
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        parts = _RESULTS[crit]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{'ok' if ok else 'NOT MET'}: {d}" for ok, d in parts)
        terminalreporter.write_line(f"{status} criterion {crit}: {detail}")
