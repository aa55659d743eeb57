import pytest

from subdense import gamma_subordinator, log_stable, pure_drift, stable, tempered

ACCEPTANCE_LINES = []


def record(number, title, passed, detail):
    ACCEPTANCE_LINES.append((number, f"[{'PASS' if passed else 'FAIL'}] #{number} {title}: {detail}"))


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def half():
    return stable(0.5)


@pytest.fixture(scope="session")
def gamma_model():
    return gamma_subordinator()


@pytest.fixture(scope="session")
def logstable():
    return log_stable(0.5, 1.0)


@pytest.fixture(scope="session")
def tempered_model():
    return tempered(1.0, 0.5, 1.0)


@pytest.fixture(scope="session")
def drift_model():
    return pure_drift(1.0)
