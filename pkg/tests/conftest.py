from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion label -> list of outcomes ("passed", "failed", "skipped")
_OUTCOMES: dict[str, list[str]] = {}
_TITLES: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = str(marker.args[0])
    _TITLES.setdefault(label, marker.args[1] if len(marker.args) > 1 else "")
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES.setdefault(label, []).append(report.outcome)
    elif report.when == "teardown" and report.failed:
        _OUTCOMES.setdefault(label, []).append("failed")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_OUTCOMES):
        outcomes = _OUTCOMES[label]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        ran = sum(o != "skipped" for o in outcomes)
        terminalreporter.write_line(
            f"{verdict} criterion {label}: {_TITLES[label]} ({ran}/{len(outcomes)} checks run)")


@pytest.fixture(scope="session")
def corpus_versions():
    import corpus

    return corpus.build_versions()


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    import corpus

    return corpus.write_corpus(tmp_path_factory.mktemp("mesh") / "xml")
