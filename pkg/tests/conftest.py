import pytest

_acceptance_results: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(criterion, name): marks a test as one numbered acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call":
        status = "PASS" if report.passed else "FAIL"
        _acceptance_results[marker.kwargs["criterion"]] = (marker.kwargs["name"], status)
    elif report.when == "setup" and report.failed:
        _acceptance_results[marker.kwargs["criterion"]] = (marker.kwargs["name"], "ERROR")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for criterion in sorted(_acceptance_results):
        name, status = _acceptance_results[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {status} - {name}")
