import re

CRITERIA = {
    1: "axioms and capacity duality on 50 families x 20 payoffs",
    2: "state DP equals exhaustive adapted-strategy maximization",
    3: "Bernstein and one-step bounds certified; binomial cross-check",
    4: "maximal-inequality factor 4 on exact trees",
    5: "G-heat solver values, reduction and comparison",
    6: "moderate-deviation band, sandwich and trend",
    7: "rate function and eta reduction",
    8: "self-normalized LIL band and cluster coverage",
    9: "controlled paths: quadratic variation, policy search, time change",
    10: "heterogeneous arrays: reduction, hand values, counting bound",
    11: "byte-identical CSV on rerun from the manifest",
}

_outcomes: dict[int, str] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.failed:
        _outcomes[k] = "FAIL"
    elif report.when == "call" and report.passed:
        _outcomes.setdefault(k, "PASS")
    elif report.skipped:
        _outcomes.setdefault(k, "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k, text in CRITERIA.items():
        if k in _outcomes:
            terminalreporter.write_line(f"criterion {k:2d}: {_outcomes[k]:4s} {text}")
