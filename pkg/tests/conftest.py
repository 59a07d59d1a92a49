from __future__ import annotations

from pathlib import Path

import pytest

from disturbsim import compose, load_corpus, load_disturbances, load_scene
from disturbsim.tasks import data_dir

DATA = data_dir()


def bundled_scene(name: str = "kitchen"):
    return load_scene(DATA / "scenes" / f"{name}.scene")


def bundled_disturbances(name: str):
    return load_disturbances(DATA / "disturbances" / f"{name}.dist")


def disturbed(name: str):
    return compose(bundled_scene(), bundled_disturbances(name))


def task_by_id(task_id: str):
    return next(t for t in load_corpus() if t.id == task_id)


@pytest.fixture
def kitchen():
    return bundled_scene()


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture
def data_root() -> Path:
    return DATA


# -- acceptance summary ----------------------------------------------------------------
#
# Tests marked ``@pytest.mark.criterion(n)`` roll up into one PASS/FAIL line per
# criterion at the end of the run. A criterion passes when all its tests pass.

_CRITERIA: dict[int, list[str]] = {}
_DETAILS: dict[int, list[str]] = {}


def note(n: int, text: str) -> None:
    """Attach a one-line measurement to criterion ``n`` for the summary."""
    _DETAILS.setdefault(n, []).append(text)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = int(marker.args[0])
    results = _CRITERIA.setdefault(n, [])
    if report.when == "call" or (report.when == "setup" and not report.passed):
        results.append("pass" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        status = "PASS" if results and all(r == "pass" for r in results) else "FAIL"
        detail = "; ".join(_DETAILS.get(n, []))
        terminalreporter.write_line(f"criterion {n:2d}: {status}" + (f" | {detail}" if detail else ""))
