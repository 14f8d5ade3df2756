import pytest

from utxodebt.ledger import Genesis, LedgerState
from utxodebt.node import Application
from utxodebt.tx import KeyPair


@pytest.fixture(scope="session")
def keys():
    return {name: KeyPair.from_seed(name) for name in ("alice", "bob", "carol", "dave", "bank", "rogue")}


@pytest.fixture
def genesis(keys):
    return Genesis(
        validators=[KeyPair.from_seed(f"validator-{i}").pubkey for i in range(4)],
        issuers=[keys["bank"].pubkey],
        allocations=[
            (keys["alice"].pubkey_hash, 1000),
            (keys["bob"].pubkey_hash, 500),
            (keys["carol"].pubkey_hash, 100),
            (keys["dave"].pubkey_hash, 70),
            (keys["rogue"].pubkey_hash, 50),
        ],
    )


@pytest.fixture
def state(genesis):
    return LedgerState.from_genesis(genesis)


@pytest.fixture
def app(genesis):
    return Application(genesis)


# -- acceptance reporting: one pass/fail line per criterion ------------------

_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    _criteria.setdefault(number, (title, []))[1].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcomes = _criteria[number]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title}")
