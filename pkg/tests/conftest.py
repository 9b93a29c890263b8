import pytest

CRITERIA = {
    1: "autodiff gradient checks",
    2: "softmax and cross-entropy",
    3: "mixtures and k-means",
    4: "probabilistic PCA subspace",
    5: "VAE and importance sampling",
    6: "RBM enumeration and training",
    7: "Metropolis-Hastings",
    8: "MMD permutation test",
    9: "policy gradients and TD",
    10: "bagging and boosting",
    11: "bounds and intervals",
    12: "hyperparameter search",
    13: "block symmetries",
    14: "end-to-end determinism",
}

_outcomes: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(crit, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = int(m.args[0])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        res = _outcomes.get(n)
        if res is None:
            continue
        ok = all(r == "passed" for r in res)
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA[n]} "
                                    f"({res.count('passed')}/{len(res)} checks)")
