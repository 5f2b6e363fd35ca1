import pytest

from cowu import EnergyModel, ScenarioConfig

_acceptance: dict[int, tuple[str, str, str]] = {}


@pytest.fixture(scope="session")
def reference() -> ScenarioConfig:
    """N = M = 100, range 94:98, L = 10, q = 2e-4, p = 0.1, zeta_max = 2000."""
    return ScenarioConfig()


@pytest.fixture(scope="session")
def energy() -> EnergyModel:
    return EnergyModel()


@pytest.fixture
def detail(request):
    """Tests call ``detail("...")`` to attach a one-line measurement to their acceptance line."""
    notes = []
    request.node._acceptance_detail = notes
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    status = "PASS" if report.passed else "FAIL"
    note = "; ".join(getattr(item, "_acceptance_detail", []))
    _acceptance[number] = (title, status, note)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, status, note = _acceptance[number]
        line = f"[{status}] {number}. {title}"
        terminalreporter.write_line(line + (f" -- {note}" if note else ""))
