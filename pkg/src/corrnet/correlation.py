"""Equal-time cross-correlations and the correlation distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._io import read_csv, write_csv
from .errors import DegenerateError, DomainError, ParseError
from .returns import NormalizedReturns

CLAMP_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CorrelationMatrix:
    asset_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "values", _frozen(self.values))
        C = self.values
        n = len(self.asset_ids)
        if C.shape != (n, n):
            raise DomainError(f"expected {n}x{n} matrix, got {C.shape}")
        if not np.all(np.isfinite(C)):
            raise DomainError("correlations must be finite")
        if np.max(np.abs(C - C.T), initial=0.0) > 1e-12:
            raise DomainError("correlation matrix is not symmetric")
        if np.max(np.abs(np.diag(C) - 1.0), initial=0.0) > 1e-12:
            raise DomainError("correlation matrix diagonal must be 1")
        if np.max(np.abs(C), initial=0.0) > 1.0 + CLAMP_TOL:
            raise DomainError("correlations must lie in [-1, 1]")
        if n and np.linalg.eigvalsh(C)[0] < -1e-9:
            raise DomainError("correlation matrix is not positive semidefinite")

    @property
    def n(self) -> int:
        return len(self.asset_ids)

    def submatrix(self, members) -> np.ndarray:
        index = {a: i for i, a in enumerate(self.asset_ids)}
        rows = [index[m] for m in members]
        return self.values[np.ix_(rows, rows)]

    def off_diagonal(self) -> np.ndarray:
        """Upper-triangle entries ``C_ij`` with ``i < j``."""
        return self.values[np.triu_indices(self.n, k=1)]


@dataclass(frozen=True)
class DistanceMatrix:
    asset_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "values", _frozen(self.values))
        D = self.values
        n = len(self.asset_ids)
        if D.shape != (n, n):
            raise DomainError(f"expected {n}x{n} matrix, got {D.shape}")
        if not np.array_equal(D, D.T):
            raise DomainError("distance matrix is not symmetric")
        if np.any(np.diag(D) != 0):
            raise DomainError("distance matrix diagonal must be 0")
        if np.any(D < 0) or np.any(D > 2.0 + CLAMP_TOL):
            raise DomainError("distances must lie in [0, 2]")

    @property
    def n(self) -> int:
        return len(self.asset_ids)


def gram_correlation(values: np.ndarray) -> np.ndarray:
    """``X X^T / T`` for standardised rows, exactly symmetric, clipped to [-1, 1], unit diagonal."""
    gram = (values @ values.T) / values.shape[1]
    upper = np.triu(gram, k=1)
    C = np.clip(upper + upper.T, -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return C


def correlation_matrix(g: NormalizedReturns) -> CorrelationMatrix:
    """``C = G G^T / T`` over standardised rows.

    Only the upper triangle of the product is kept and mirrored, so the
    result is exactly symmetric; the diagonal is set to 1.
    """
    n, t = g.values.shape
    if n < 2:
        raise DegenerateError("need at least two assets for a correlation matrix")
    if t < 2:
        raise DegenerateError("need at least two return observations")
    return CorrelationMatrix(g.asset_ids, gram_correlation(g.values))


def distance_matrix(c: CorrelationMatrix) -> DistanceMatrix:
    """``D_ij = sqrt(2 (1 - C_ij))``.

    ``1 - C_ij`` at or below ``CLAMP_TOL`` counts as a duplicate pair and maps
    to distance 0, absorbing rounding on either side of ``C_ij = 1``.
    """
    gap = 1.0 - c.values
    D = np.sqrt(2.0 * np.where(gap <= CLAMP_TOL, 0.0, gap))
    D = np.triu(D, k=1)
    return DistanceMatrix(c.asset_ids, D + D.T)


def histogram_rows(values, bins: int = 40, value_range=None) -> list[tuple[float, float, int]]:
    """``(bin_left, bin_right, count)`` rows; counts sum to ``len(values)``."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=value_range)
    return [(float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(len(counts))]


def correlation_histogram(c: CorrelationMatrix, bins: int = 40) -> list[tuple[float, float, int]]:
    """Distribution of the ``N(N-1)/2`` distinct off-diagonal coefficients."""
    return histogram_rows(c.off_diagonal(), bins=bins, value_range=(-1.0, 1.0))


def write_matrix(asset_ids, values, dest) -> None:
    """Square matrix with a header row and a label column of asset ids."""
    values = np.asarray(values)
    rows = [[a, *map(float, row)] for a, row in zip(asset_ids, values)]
    write_csv(dest, ["asset_id", *asset_ids], rows)


def read_matrix(path) -> tuple[tuple[str, ...], np.ndarray]:
    header, rows = read_csv(path)
    ids = tuple(header[1:])
    if [r[0] for r in rows] != list(ids):
        raise ParseError(f"{path}: row labels do not match the header")
    return ids, np.array([[float(v) for v in r[1:]] for r in rows])
