import pytest

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``check(ok, detail)`` records one acceptance verdict and asserts it."""
    verdicts = request.config.stash.setdefault(_VERDICTS, {})
    name = request.node.function.__doc__.strip().splitlines()[0]

    def check(ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]"
        verdicts[request.node.nodeid] = line
        print(line)
        assert ok, line

    return check


def pytest_runtest_logreport(report):
    # a criterion that crashed before reaching its check still gets a line
    if report.when == "call" and report.failed and "test_acceptance" in report.nodeid:
        verdicts = _CONFIG.stash.setdefault(_VERDICTS, {})
        verdicts.setdefault(report.nodeid, f"FAIL  {report.nodeid}  [error]")


def pytest_configure(config):
    global _CONFIG
    _CONFIG = config


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_VERDICTS, {})
    if verdicts:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in verdicts.values():
            terminalreporter.write_line(line)
