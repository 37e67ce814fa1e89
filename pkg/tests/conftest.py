"""Shared pytest hooks.

Tests in ``test_acceptance.py`` carry an ``acceptance`` marker with a label;
the terminal summary prints one PASS/FAIL line per label along with the
measured quantities each test recorded through ``record_property``.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): end-to-end acceptance check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _RESULTS[mark.args[0]] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_RESULTS, key=lambda s: int(s.split(".")[0])):
        status, detail = _RESULTS[label]
        terminalreporter.write_line(f"{status} {label}" + (f"  [{detail}]" if detail else ""))
