from __future__ import annotations

import pytest

from detevans.model import ModelParams
from detevans.profile import continue_family, solve_profile

_CACHE: dict = {}
_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def tame():
    return solve_profile(ModelParams())


@pytest.fixture(scope="session")
def family(tame):
    """Profiles reached by continuation from the tame case, cached per session."""

    def get(**changes) -> object:
        key = tuple(sorted(changes.items()))
        if key not in _CACHE:
            _CACHE[key] = continue_family(tame, ModelParams(**changes)) if changes else tame
        return _CACHE[key]

    return get


@pytest.fixture(scope="session")
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, ok: bool, detail: str) -> bool:
        lines[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
