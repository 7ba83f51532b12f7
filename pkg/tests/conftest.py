"""Shared test plumbing: the acceptance report printed at the end of the session."""

from collections import OrderedDict

import pytest

_RESULTS: "OrderedDict[int, list[tuple[str | None, bool, str]]]" = OrderedDict()


def _record(criterion: int, ok: bool, detail: str, part: str | None = None) -> None:
    _RESULTS.setdefault(criterion, []).append((part, bool(ok), detail))
    label = f"{criterion}{'.' + part if part else ''}"
    print(f"criterion {label}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def acceptance():
    """``acceptance(criterion, ok, detail, part=None)`` records one (sub-)check."""
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS):
        entries = _RESULTS[criterion]
        ok = all(e[1] for e in entries)
        if len(entries) == 1 and entries[0][0] is None:
            detail = entries[0][2]
        else:
            passed = sum(e[1] for e in entries)
            failing = [f"{p}: {d}" for p, good, d in entries if not good]
            detail = f"{passed}/{len(entries)} checks pass"
            if failing:
                detail += "; failing " + "; ".join(failing)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}")
