"""Daily log returns and their standardisation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write_text
from .errors import DegenerateError, DomainError, IncompletePanelError
from .market_data import PricePanel


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ReturnMatrix:
    """Log returns, shape ``(N, T)``."""

    asset_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 2 or self.values.shape[0] != len(self.asset_ids):
            raise DomainError("values must be N x T with one row per asset")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("returns must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class NormalizedReturns:
    """Rows with zero mean and unit population standard deviation.

    ``row_means`` and ``row_stds`` hold the statistics of the raw returns.
    """

    asset_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    row_means: np.ndarray = field(repr=False)
    row_stds: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        for name in ("values", "row_means", "row_stds"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n_assets(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    def rows(self, members) -> np.ndarray:
        index = {a: i for i, a in enumerate(self.asset_ids)}
        try:
            return self.values[[index[m] for m in members]]
        except KeyError as exc:
            raise DomainError(f"asset {exc.args[0]!r} not in normalized returns") from None


def log_returns(panel: PricePanel) -> ReturnMatrix:
    """``G_i(t) = ln P_i(t+1) - ln P_i(t)`` over consecutive panel dates."""
    if panel.n_dates < 2:
        raise DomainError("need at least two price dates")
    if not panel.is_complete():
        bad = [a for a, m in zip(panel.asset_ids, panel.missing.any(axis=1)) if m]
        raise IncompletePanelError(f"missing prices for {bad}; run filter_complete first")
    if np.any(panel.prices <= 0):
        raise DomainError("prices must be positive")
    return ReturnMatrix(panel.asset_ids, np.diff(np.log(panel.prices), axis=1))


def normalize_returns(returns: ReturnMatrix) -> NormalizedReturns:
    """Demean each row and divide by its population (divide-by-T) std."""
    G = returns.values
    mean = G.mean(axis=1)
    centred = G - mean[:, None]
    std = np.sqrt((centred**2).mean(axis=1))
    scale = np.maximum(1.0, np.abs(G).max(axis=1, initial=0.0))
    flat = std <= 1e-14 * scale
    if flat.any():
        names = [a for a, f in zip(returns.asset_ids, flat) if f]
        raise DegenerateError(f"zero-variance returns for {names}; exclude constant-price assets")
    return NormalizedReturns(returns.asset_ids, centred / std[:, None], mean, std)


def export_matrix_rows(asset_ids, values, dest) -> None:
    """Write an ``N x T`` matrix with an ``asset_id`` label column."""
    values = np.asarray(values)
    head = "asset_id," + ",".join(f"t{j}" for j in range(values.shape[1]))
    lines = [head] + [
        a + "," + ",".join(repr(float(v)) for v in row) for a, row in zip(asset_ids, values)
    ]
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        atomic_write_text(dest, text)
    else:
        dest.write(text)
