import pytest

from topdown_clo import fixtures
from topdown_clo.deal import load_pv_matrix, load_quotes, load_scenarios
from topdown_clo.pricing import BespokeSpec, calibrate_index


@pytest.fixture(scope="session")
def scenarios():
    return load_scenarios(fixtures.SCENARIOS)


@pytest.fixture(scope="session")
def index_pv(scenarios):
    return load_pv_matrix(fixtures.INDEX_PV, scenarios)


@pytest.fixture(scope="session")
def index_quotes():
    return load_quotes(fixtures.INDEX_QUOTES)


@pytest.fixture(scope="session")
def bespoke_pv(scenarios):
    return load_pv_matrix(fixtures.BESPOKE_PV, scenarios)


@pytest.fixture(scope="session")
def index(index_pv, index_quotes):
    return calibrate_index(index_pv, index_quotes)


@pytest.fixture(scope="session")
def bespoke(bespoke_pv):
    return BespokeSpec(
        bespoke_pv,
        market_loan_price=fixtures.BESPOKE_LOAN_PRICE,
        pinned_tranches={"A": fixtures.BESPOKE_AAA_PRICE},
    )


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
