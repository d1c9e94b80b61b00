from collections import defaultdict

import pytest

# criterion id -> title, node ids, outcomes
_criteria: dict = {}
_node_criterion: dict = {}
_outcomes = defaultdict(list)


def pytest_itemcollected(item):
    m = item.get_closest_marker("acceptance")
    if m is not None:
        cid, title = m.args[:2]
        _criteria.setdefault(cid, title)
        _node_criterion[item.nodeid] = cid


def pytest_runtest_logreport(report):
    cid = _node_criterion.get(report.nodeid)
    if cid is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes[cid].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c[2:])):
        outs = _outcomes.get(cid, [])
        if not outs:
            verdict = "NOT RUN"
        elif "failed" in outs:
            verdict = "FAIL"
        elif all(o == "passed" for o in outs):
            verdict = "PASS"
        else:
            verdict = "SKIP"
        tr.write_line(f"{cid} {verdict:<7} {_criteria[cid]} ({len(outs)} checks)")


@pytest.fixture(scope="session")
def default_suite(tmp_path_factory):
    """The full default suite, run once per session (about a minute)."""
    from kleeminty_bench.cli import SuiteConfig, run_suite

    out = tmp_path_factory.mktemp("suite_a")
    run_suite(SuiteConfig(), out)
    return out
