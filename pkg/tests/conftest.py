import warnings

import pytest

from spdepath.harness.config import load_config
from spdepath.harness.convergence import run_convergence

_REPORTS = {}


def shipped_report(name, **overrides):
    """Convergence report of a shipped config, computed once per session."""
    key = (name, tuple(sorted(overrides.items())))
    if key not in _REPORTS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            config = load_config(name).with_overrides(**overrides)
        _REPORTS[key] = run_convergence(config)
    return _REPORTS[key]


@pytest.fixture
def report_of():
    return shipped_report


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    _ACCEPTANCE[props["criterion"]] = (report.outcome, props.get("measured", ""),
                                       props.get("target", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        outcome, measured, target = _ACCEPTANCE[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:>2}: {verdict}  measured {measured}  (target {target})")
