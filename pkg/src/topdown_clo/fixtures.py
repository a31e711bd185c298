"""Paths to the bundled CLO-IDX / CLO-BSPK data files."""

from pathlib import Path

DATA = Path(__file__).resolve().parent / "data"

SCENARIOS = DATA / "loan_scenarios.csv"
INDEX_PV = DATA / "clo_idx_pv.csv"
INDEX_QUOTES = DATA / "clo_idx_quotes.csv"
BESPOKE_PV = DATA / "clo_bspk_pv.csv"
BESPOKE_QUOTES = DATA / "clo_bspk_quotes.csv"
SYNTHETIC_SPEC = DATA / "lcdx_style.ini"

# bespoke average loan price that reproduces the published bespoke model prices
BESPOKE_LOAN_PRICE = 87.78
BESPOKE_AAA_PRICE = 89.35
