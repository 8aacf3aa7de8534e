import os

import numpy as np
import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def record(request):
    """Attach a detail string to the current acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    num = marker.args[0]

    def _record(detail):
        _CRITERIA.setdefault(num, {})["detail"] = detail

    return _record


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    num = _criterion_of(report)
    if num is None:
        return
    entry = _CRITERIA.setdefault(num, {})
    entry["outcome"] = report.outcome
    entry["name"] = report.nodeid.split("::")[-1]


def _criterion_of(report):
    for key, value in report.user_properties:
        if key == "criterion":
            return value
    return None


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        tag = "PASS" if e.get("outcome") == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {tag} {e.get('name', '')}: {e.get('detail', '')}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _no_backend_env(monkeypatch):
    monkeypatch.delenv("STOCHHEAT_BACKEND", raising=False)
