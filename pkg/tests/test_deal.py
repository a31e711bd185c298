import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topdown_clo import fixtures
from topdown_clo.deal import (
    DealQuotes,
    Scenario,
    ScenarioSet,
    TranchePVMatrix,
    load_pv_matrix,
    load_quotes,
    load_scenarios,
    validate_quotes,
    write_pv_matrix,
    write_quotes,
    write_scenarios,
)
from topdown_clo.exceptions import ValidationError


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestScenarios:
    def test_bundled_grid(self, scenarios):
        assert len(scenarios) == 32
        assert list(scenarios.ids) == list(range(32))
        assert scenarios[0].cadr == 0.0
        assert scenarios[0].crr == pytest.approx(0.84)
        assert np.all(np.diff(scenarios.cadr) > 0)

    @pytest.mark.parametrize("field", ["cadr", "capr", "crr"])
    @pytest.mark.parametrize("bad", [-0.01, 1.01])
    def test_rates_outside_unit_interval(self, field, bad):
        kw = dict(id=0, cadr=0.1, capr=0.1, crr=0.5)
        kw[field] = bad
        with pytest.raises(ValidationError):
            Scenario(**kw)

    def test_ids_must_increase(self):
        with pytest.raises(ValidationError):
            ScenarioSet((Scenario(1, 0, 0, 0), Scenario(1, 0.1, 0, 0)))
        with pytest.raises(ValidationError):
            ScenarioSet(())

    def test_percent_file_errors(self, tmp_path):
        with pytest.raises(ValidationError, match="outside"):
            load_scenarios(_write(tmp_path, "s.csv", "cadr,capr,crr\n120,0,0\n"))
        with pytest.raises(ValidationError, match="not a number"):
            load_scenarios(_write(tmp_path, "s.csv", "cadr,capr,crr\n1,x,0\n"))
        with pytest.raises(ValidationError, match="no scenarios"):
            load_scenarios(_write(tmp_path, "s.csv", "cadr,capr,crr\n"))
        with pytest.raises(ValidationError, match="no such file"):
            load_scenarios(tmp_path / "missing.csv")

    def test_round_trip(self, scenarios, tmp_path):
        p = tmp_path / "s.csv"
        write_scenarios(scenarios, p)
        assert load_scenarios(p) == scenarios


class TestPVMatrix:
    def test_index_fixture(self, index_pv):
        assert index_pv.tranche_names == ("A", "B", "C", "D", "E", "SUBORD")
        assert index_pv.values.shape == (32, 6)
        # first and last rows of the published table
        assert index_pv.values[0, 0] == 103.92
        assert index_pv.collateral[0] == 109.73
        assert index_pv.column("SUBORD")[-1] == pytest.approx(0.0)

    def test_arrays_read_only(self, index_pv):
        with pytest.raises(ValueError):
            index_pv.values[0, 0] = 1.0

    def test_row_permutation_is_realigned(self, scenarios, tmp_path):
        lines = fixtures.INDEX_PV.read_text().splitlines()
        rng = np.random.default_rng(3)
        body = [lines[1 + i] for i in rng.permutation(len(lines) - 1)]
        p = _write(tmp_path, "pv.csv", "\n".join([lines[0], *body]) + "\n")
        assert load_pv_matrix(p, scenarios) == load_pv_matrix(fixtures.INDEX_PV, scenarios)

    def test_missing_row(self, scenarios, tmp_path):
        lines = fixtures.INDEX_PV.read_text().splitlines()
        p = _write(tmp_path, "pv.csv", "\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValidationError, match="misaligned"):
            load_pv_matrix(p, scenarios)

    def test_duplicate_row(self, scenarios, tmp_path):
        lines = fixtures.INDEX_PV.read_text().splitlines()
        p = _write(tmp_path, "pv.csv", "\n".join(lines + [lines[1]]) + "\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_pv_matrix(p, scenarios)

    def test_negative_pv(self, scenarios, tmp_path):
        lines = fixtures.INDEX_PV.read_text().splitlines()
        lines[2] = lines[2].replace("103.93", "-1")
        with pytest.raises(ValidationError, match="negative"):
            load_pv_matrix(_write(tmp_path, "pv.csv", "\n".join(lines)), scenarios)

    def test_duplicate_tranche_names(self, scenarios):
        with pytest.raises(ValidationError):
            TranchePVMatrix(scenarios, ("A", "A"), np.ones((32, 2)), np.ones(32))

    def test_round_trip(self, index_pv, scenarios, tmp_path):
        p = tmp_path / "pv.csv"
        write_pv_matrix(index_pv, p)
        assert load_pv_matrix(p, scenarios) == index_pv


class TestQuotes:
    def test_index_quotes(self, index_quotes):
        assert index_quotes.prices == {
            "A": 92.97, "B": 82.16, "C": 78.83, "D": 72.13, "E": 63.77, "SUBORD": 44.89,
        }
        assert index_quotes.market_loan_price == 89.51
        assert index_quotes.metadata["deal"] == "CLO-IDX"
        assert index_quotes.resolve("AA") == "B"

    def test_bespoke_lists_unquoted_tranches(self):
        q = load_quotes(fixtures.BESPOKE_QUOTES)
        assert q.prices == {"A": 89.35}
        assert set(q.tranche_info) == {"A", "B", "C", "D", "E", "SUBORD"}

    def test_unknown_rating(self, index_quotes):
        with pytest.raises(ValidationError):
            index_quotes.resolve("CCC")

    def test_quote_without_pv_column(self, index_quotes, bespoke_pv):
        q = DealQuotes({**index_quotes.prices, "X": 50.0})
        with pytest.raises(ValidationError, match="without a PV column"):
            validate_quotes(q, bespoke_pv)

    def test_negative_price(self, tmp_path):
        with pytest.raises(ValidationError, match="negative"):
            load_quotes(_write(tmp_path, "q.csv", "tranche,price\nA,-1\n"))

    def test_no_prices(self, tmp_path):
        with pytest.raises(ValidationError, match="no tranche prices"):
            load_quotes(_write(tmp_path, "q.csv", "tranche,price\nA,\n"))

    def test_round_trip(self, index_quotes, tmp_path):
        p = tmp_path / "q.csv"
        write_quotes(index_quotes, p)
        back = load_quotes(p)
        assert back.prices == index_quotes.prices
        assert back.market_loan_price == index_quotes.market_loan_price
        assert back.resolve("AA") == "B"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 100), st.integers(0, 100)),
                min_size=1, max_size=12, unique_by=lambda r: r[0]))
def test_pv_loading_ignores_row_order(tmp_path_factory, rows):
    rows = sorted(rows)
    scen = ScenarioSet.from_percent((c / 100, p, r) for c, p, r in rows)
    header = "cadr,T1,COL"
    body = [f"{c / 100:g},{p + r},{r}" for c, p, r in rows]
    d = tmp_path_factory.mktemp("pv")
    a = _write(d, "a.csv", "\n".join([header, *body]))
    b = _write(d, "b.csv", "\n".join([header, *reversed(body)]))
    assert load_pv_matrix(a, scen) == load_pv_matrix(b, scen)
