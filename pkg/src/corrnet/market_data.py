"""Price panels: loading, validation, windowing, completeness filtering.

The canonical input is a long-format CSV with header ``date,asset_id,close``.
Missing (asset, date) cells are stored as NaN; the only missing-data policy
is exclusion via :func:`filter_complete`.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import atomic_write_text
from .errors import (
    DomainError,
    EmptyPanelError,
    IntegrityError,
    ParseError,
    RangeError,
)

PRICE_HEADER = ("date", "asset_id", "close")
RANKING_HEADER = ("asset_id", "rank")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Closing prices, one row per asset and one column per calendar date.

    ``prices`` has shape ``(len(asset_ids), len(dates))``; missing cells are NaN.
    """

    asset_ids: tuple[str, ...]
    dates: tuple[date, ...]
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", _frozen(self.prices))
        if len(set(self.asset_ids)) != len(self.asset_ids):
            raise IntegrityError("asset_ids are not unique")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DomainError("dates must be strictly increasing")
        if self.prices.shape != (len(self.asset_ids), len(self.dates)):
            raise DomainError(
                f"prices shape {self.prices.shape} does not match "
                f"{len(self.asset_ids)} assets x {len(self.dates)} dates"
            )
        present = self.prices[~np.isnan(self.prices)]
        if np.any(present <= 0) or not np.all(np.isfinite(present)):
            raise DomainError("present prices must be finite and > 0")

    def __eq__(self, other):
        if not isinstance(other, PricePanel):
            return NotImplemented
        return (
            self.asset_ids == other.asset_ids
            and self.dates == other.dates
            and np.array_equal(self.prices, other.prices, equal_nan=True)
        )

    __hash__ = None

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.prices)

    def is_complete(self) -> bool:
        return not self.missing.any()

    def select_assets(self, asset_ids: Iterable[str]) -> PricePanel:
        """Restrict to ``asset_ids``, keeping this panel's row order."""
        wanted = set(asset_ids)
        unknown = wanted.difference(self.asset_ids)
        if unknown:
            raise DomainError(f"unknown asset ids: {sorted(unknown)}")
        rows = [i for i, a in enumerate(self.asset_ids) if a in wanted]
        return PricePanel(
            tuple(self.asset_ids[i] for i in rows), self.dates, self.prices[rows]
        )


@dataclass(frozen=True)
class RankingSnapshot:
    """Market-capitalisation ranks as of one date."""

    as_of_date: date | None
    ranks: Mapping[str, int]

    def __post_init__(self):
        ranks = dict(self.ranks)
        for asset, r in ranks.items():
            if not isinstance(r, (int, np.integer)) or r < 1:
                raise DomainError(f"rank for {asset!r} must be a positive integer, got {r!r}")
        if len(set(ranks.values())) != len(ranks):
            seen: dict[int, str] = {}
            for asset, r in ranks.items():
                if r in seen:
                    raise IntegrityError(
                        f"duplicate rank {r} for {seen[r]!r} and {asset!r}"
                    )
                seen[r] = asset
        object.__setattr__(self, "ranks", ranks)

    def __len__(self):
        return len(self.ranks)

    def rank_of(self, asset_id: str) -> int | None:
        return self.ranks.get(asset_id)

    def top(self, k: int) -> list[str]:
        return [a for a, _ in sorted(self.ranks.items(), key=lambda kv: kv[1])[:k]]


@dataclass(frozen=True)
class AnalysisWindow:
    """Return-observation window: ``n_days`` returns for ``n_assets`` assets."""

    start_date: date
    end_date: date
    n_assets: int
    n_days: int

    def __post_init__(self):
        if self.end_date <= self.start_date:
            raise DomainError("end_date must be after start_date")
        if self.n_assets < 1 or self.n_days < 1:
            raise DomainError("window needs at least one asset and one return")

    @property
    def q_factor(self) -> float:
        return self.n_days / self.n_assets

    @classmethod
    def of(cls, panel: PricePanel) -> AnalysisWindow:
        """Window described by a (complete) price panel.

        The first price date only anchors the first return, so return days
        run from the second date to the last.
        """
        if panel.n_dates < 2:
            raise DomainError("need at least two price dates")
        return cls(panel.dates[1], panel.dates[-1], panel.n_assets, panel.n_dates - 1)


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        raise TypeError(f"cannot read records from {type(source).__name__}")
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def _rows(text: str, header: Sequence[str]):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError("empty input", line=1) from None
    if tuple(c.strip() for c in first) != tuple(header):
        raise ParseError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", line=1)
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
        yield reader.line_num, [c.strip() for c in row]


def load_price_panel(source) -> PricePanel:
    """Read a ``date,asset_id,close`` file into a :class:`PricePanel`.

    ``source`` may be a path, raw bytes, or a binary/text file object. Assets
    appear in order of first occurrence; dates are the sorted union over all
    records.
    """
    cells: dict[tuple[str, date], float] = {}
    assets: dict[str, None] = {}
    for line, (d, asset, close) in _rows(_read_text(source), PRICE_HEADER):
        try:
            day = date.fromisoformat(d)
        except ValueError:
            raise ParseError(f"bad date {d!r}", line=line) from None
        try:
            value = float(close)
        except ValueError:
            raise ParseError(f"bad close {close!r}", line=line) from None
        if not asset:
            raise ParseError("empty asset_id", line=line)
        if not math.isfinite(value) or value <= 0:
            raise DomainError(f"line {line}: close must be a positive number, got {close!r}")
        key = (asset, day)
        if key in cells:
            raise IntegrityError(f"line {line}: duplicate cell for {asset!r} on {day}")
        cells[key] = value
        assets.setdefault(asset)

    asset_ids = tuple(assets)
    dates = tuple(sorted({d for _, d in cells}))
    col = {d: j for j, d in enumerate(dates)}
    row = {a: i for i, a in enumerate(asset_ids)}
    prices = np.full((len(asset_ids), len(dates)), np.nan)
    for (a, d), v in cells.items():
        prices[row[a], col[d]] = v
    return PricePanel(asset_ids, dates, prices)


def write_price_panel(panel: PricePanel, dest) -> None:
    """Write ``panel`` in long format; missing cells are omitted."""
    lines = [",".join(PRICE_HEADER)]
    for j, d in enumerate(panel.dates):
        iso = d.isoformat()
        for i, a in enumerate(panel.asset_ids):
            v = panel.prices[i, j]
            if not np.isnan(v):
                lines.append(f"{iso},{a},{float(v)!r}")
    _write_text(dest, "\n".join(lines) + "\n")


def _write_text(dest, text: str) -> None:
    if isinstance(dest, (str, os.PathLike)):
        atomic_write_text(dest, text)
    else:
        dest.write(text)


def load_ranking_snapshot(source, as_of_date: date | None = None) -> RankingSnapshot:
    """Read an ``asset_id,rank`` file."""
    ranks: dict[str, int] = {}
    for line, (asset, rank) in _rows(_read_text(source), RANKING_HEADER):
        try:
            r = int(rank)
        except ValueError:
            raise ParseError(f"bad rank {rank!r}", line=line) from None
        if r < 1:
            raise DomainError(f"line {line}: rank must be positive, got {r}")
        if asset in ranks:
            raise IntegrityError(f"line {line}: duplicate asset {asset!r}")
        ranks[asset] = r
    return RankingSnapshot(as_of_date, ranks)


def write_ranking_snapshot(snapshot: RankingSnapshot, dest) -> None:
    lines = [",".join(RANKING_HEADER)]
    lines += [f"{a},{r}" for a, r in snapshot.ranks.items()]
    _write_text(dest, "\n".join(lines) + "\n")


def slice_window(panel: PricePanel, start: date, end: date) -> PricePanel:
    """Restrict ``panel`` to price dates in ``[start, end]`` inclusive."""
    if not start < end:
        raise RangeError(f"start {start} must precede end {end}")
    if not panel.dates or start < panel.dates[0] or end > panel.dates[-1]:
        span = f"{panel.dates[0]}..{panel.dates[-1]}" if panel.dates else "empty"
        raise RangeError(f"window {start}..{end} outside panel range {span}")
    cols = [j for j, d in enumerate(panel.dates) if start <= d <= end]
    return PricePanel(panel.asset_ids, tuple(panel.dates[j] for j in cols), panel.prices[:, cols])


def return_window(panel: PricePanel, start: date, end: date) -> PricePanel:
    """Prices needed for daily returns on every calendar day in ``[start, end]``.

    The return on ``start`` uses the previous day's close, so the slice runs
    from ``start - 1 day``; a year of return days therefore needs 366 closes.
    """
    return slice_window(panel, start - timedelta(days=1), end)


def filter_complete(panel: PricePanel, start: date | None = None, end: date | None = None) -> PricePanel:
    """Keep the assets with a price on every panel date in ``[start, end]``.

    Dates default to the panel's full range. Asset order is preserved.
    """
    start = panel.dates[0] if start is None else start
    end = panel.dates[-1] if end is None else end
    if panel.dates and (start < panel.dates[0] or end > panel.dates[-1]):
        raise RangeError(f"window {start}..{end} outside panel range {panel.dates[0]}..{panel.dates[-1]}")
    cols = [j for j, d in enumerate(panel.dates) if start <= d <= end]
    complete = ~np.isnan(panel.prices[:, cols]).any(axis=1)
    if not complete.any():
        raise EmptyPanelError(f"no asset has a complete price record over {start}..{end}")
    keep = np.flatnonzero(complete)
    return PricePanel(tuple(panel.asset_ids[i] for i in keep), panel.dates, panel.prices[keep])


def synthesize_panel(
    seed: int,
    n_assets: int,
    n_days: int,
    n_factors: int = 0,
    factor_loadings_scale: float = 0.0,
    start: date = date(2019, 1, 1),
) -> PricePanel:
    """Geometric price paths driven by a linear Gaussian factor model.

    Log returns are ``vol_i * (sum_f beta_if * F_f(t) + eps_i(t))`` with
    standard normal factors and noise. ``n_days`` is the number of returns,
    so the panel has ``n_days + 1`` consecutive calendar dates from ``start``.
    The first factor loads positively on every asset (a market mode); further
    factors get random signs. With ``n_factors == 0`` returns are i.i.d.
    Gaussian.
    """
    if n_assets < 2 or n_days < 2 or n_factors < 0:
        raise DomainError("need n_assets >= 2, n_days >= 2, n_factors >= 0")
    rng = np.random.default_rng(seed)
    vol = rng.uniform(0.01, 0.05, size=n_assets)
    p0 = 100.0 * np.exp(rng.uniform(-3.0, 3.0, size=n_assets))
    noise = rng.standard_normal((n_assets, n_days))
    if n_factors:
        factors = rng.standard_normal((n_factors, n_days))
        beta = factor_loadings_scale * rng.uniform(0.75, 1.25, size=(n_assets, n_factors))
        if n_factors > 1:
            beta[:, 1:] *= rng.choice([-1.0, 1.0], size=(n_assets, n_factors - 1))
        noise = noise + beta @ factors
    log_ret = vol[:, None] * noise
    log_prices = np.log(p0)[:, None] + np.concatenate(
        [np.zeros((n_assets, 1)), np.cumsum(log_ret, axis=1)], axis=1
    )
    dates = tuple(start + timedelta(days=k) for k in range(n_days + 1))
    ids = tuple(f"SYN{i:03d}" for i in range(n_assets))
    return PricePanel(ids, dates, np.exp(log_prices))
