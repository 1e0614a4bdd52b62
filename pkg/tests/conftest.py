from __future__ import annotations

import pytest

ACCEPTANCE_KEY = pytest.StashKey[dict]()
CRITERIA = range(1, 12)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record the outcome of one acceptance criterion; several calls for one number are AND-ed."""
    store = request.config.stash[ACCEPTANCE_KEY]

    def record(n: int, ok: bool, detail: str) -> bool:
        prev = store.get(n)
        if prev is None:
            store[n] = (bool(ok), [detail])
        else:
            store[n] = (prev[0] and bool(ok), prev[1] + [detail])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in CRITERIA:
        if n not in store:
            terminalreporter.write_line(f"ACCEPTANCE criterion {n}: NOT RUN")
            continue
        ok, details = store[n]
        terminalreporter.write_line(f"ACCEPTANCE criterion {n}: {'PASS' if ok else 'FAIL'} ({'; '.join(details)})")
