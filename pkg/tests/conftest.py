import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Tags an acceptance test with its label for the end-of-run summary."""
    def tag(label: str, detail: str = ""):
        request.node.user_properties.append(("criterion", label))
        if detail:
            request.node.user_properties.append(("detail", detail))
    return tag


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    key = (props["criterion"], report.nodeid)
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[key] = (report.outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (label, nodeid), (outcome, detail) in sorted(_ACCEPTANCE.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"{verdict}  {label}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
