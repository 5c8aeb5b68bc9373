from datetime import date, timedelta

import numpy as np
import pytest

from corrnet.market_data import PricePanel


def make_panel(prices, start=date(2019, 1, 1), ids=None):
    prices = np.asarray(prices, dtype=float)
    if prices.ndim == 1:
        prices = prices[None, :]
    ids = ids or [f"A{i}" for i in range(prices.shape[0])]
    dates = [start + timedelta(days=k) for k in range(prices.shape[1])]
    return PricePanel(ids, dates, prices)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
