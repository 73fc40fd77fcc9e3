import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion; printed after the run."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number: int, ok, detail: str, elapsed: float, limit: float | None = None, label: str = "") -> None:
        timed = elapsed <= limit if limit is not None else True
        if ok is None:
            verdict = "PARTIAL"
        else:
            verdict = "PASS" if ok and timed else "FAIL"
        budget = f" (limit {limit:g}s)" if limit is not None else ""
        name = label or f"criterion {number}"
        lines.append((number, f"{name}: {verdict}  {elapsed:.1f}s{budget}  {detail}"))

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda item: item[0]):
        terminalreporter.write_line(line)
