import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)


def pytest_runtest_logreport(report):
    # a test that dies before recording its checks still counts as a failure
    if report.failed and "test_acceptance.py::test_c" in report.nodeid:
        mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
        name = report.nodeid.split("::")[-1]
        cid = int(name.split("_")[1][1:])
        if mod is not None and not any(not ok for _, ok, _ in mod.RESULTS[cid]):
            mod.RESULTS[cid].append((f"{name} errored", False, ""))
