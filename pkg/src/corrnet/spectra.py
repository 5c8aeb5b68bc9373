"""Random-matrix diagnostics for a correlation matrix.

Eigenvalues are compared against the Marchenko-Pastur support of a Wishart
matrix with the same ``Q = T/N``; eigenvector components are compared
against a standard normal after rescaling by ``sqrt(N)``; localisation is
measured by the inverse participation ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationMatrix
from .errors import DomainError, NumericalError

KS_SERIES_TERMS = 100
KS_SERIES_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs sorted by descending eigenvalue.

    ``eigenvectors[:, k]`` is the unit eigenvector for ``eigenvalues[k]``,
    signed so that its largest-magnitude component is positive.
    """

    asset_ids: tuple[str, ...]
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])


@dataclass(frozen=True)
class MpBounds:
    q_factor: float
    sigma_sq: float
    lambda_minus: float
    lambda_plus: float

    def contains(self, value: float) -> bool:
        return self.lambda_minus <= value <= self.lambda_plus


@dataclass(frozen=True)
class BulkPartition:
    """Eigenvalue positions (into the descending order) inside / outside the bulk."""

    bulk_indices: tuple[int, ...]
    deviating_indices: tuple[int, ...]
    n_below: int
    n_above: int

    @property
    def n_deviating(self) -> int:
        return len(self.deviating_indices)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_a: int
    n_b: int

    def rejects(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class IprSeries:
    values: np.ndarray = field(repr=False)
    mean_ipr: float

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


def eigendecompose(c: CorrelationMatrix) -> SpectralDecomposition:
    C = c.values
    try:
        w, v = np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        diag = (
            f"N={C.shape[0]}, frobenius={np.linalg.norm(C):.6g}, "
            f"max|C-C^T|={np.max(np.abs(C - C.T)):.3g}, finite={bool(np.isfinite(C).all())}"
        )
        raise NumericalError(f"eigendecomposition failed to converge ({diag}): {exc}") from exc
    order = np.argsort(w, kind="stable")[::-1]
    w = w[order]
    v = v[:, order]
    pivots = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[pivots, np.arange(v.shape[1])] < 0, -1.0, 1.0)
    return SpectralDecomposition(c.asset_ids, w, v * signs)


def mp_bounds(q_factor: float, sigma_sq: float = 1.0) -> MpBounds:
    """Support ``[lambda_-, lambda_+]`` of the Marchenko-Pastur law.

    ``lambda_pm = sigma_sq * (1 + 1/Q +- 2 sqrt(1/Q))``.
    """
    if not q_factor >= 1:
        raise DomainError(f"Q = T/N must be >= 1, got {q_factor}")
    if not sigma_sq > 0:
        raise DomainError(f"sigma_sq must be positive, got {sigma_sq}")
    inv_q = 1.0 / q_factor
    lo = sigma_sq * (1.0 + inv_q - 2.0 * math.sqrt(inv_q))
    hi = sigma_sq * (1.0 + inv_q + 2.0 * math.sqrt(inv_q))
    return MpBounds(q_factor, sigma_sq, max(lo, 0.0), hi)


def mp_density(lam, q_factor: float, sigma_sq: float = 1.0):
    """Marchenko-Pastur eigenvalue density; zero outside the support.

    Accepts a scalar or an array and returns the same kind.
    """
    b = mp_bounds(q_factor, sigma_sq)
    x = np.asarray(lam, dtype=float)
    inside = (x > b.lambda_minus) & (x < b.lambda_plus)
    safe = np.where(inside, x, 1.0)
    radicand = np.maximum((b.lambda_plus - safe) * (safe - b.lambda_minus), 0.0)
    dens = np.where(inside, q_factor / (2.0 * math.pi * sigma_sq) * np.sqrt(radicand) / safe, 0.0)
    return float(dens) if dens.ndim == 0 else dens


def classify_eigenvalues(spec: SpectralDecomposition, bounds: MpBounds) -> BulkPartition:
    """Closed-interval bulk membership."""
    lam = spec.eigenvalues
    below = lam < bounds.lambda_minus
    above = lam > bounds.lambda_plus
    outside = below | above
    return BulkPartition(
        tuple(int(i) for i in np.flatnonzero(~outside)),
        tuple(int(i) for i in np.flatnonzero(outside)),
        int(below.sum()),
        int(above.sum()),
    )


def scaled_components(spec: SpectralDecomposition, index: int) -> np.ndarray:
    """Components of eigenvector ``index`` times ``sqrt(N)`` (unit variance scale)."""
    if not 0 <= index < spec.n:
        raise IndexError(f"eigenvector index {index} out of range for N={spec.n}")
    return spec.eigenvectors[:, index] * math.sqrt(spec.n)


def pooled_components(spec: SpectralDecomposition, indices, symmetric: bool = False) -> np.ndarray:
    """Scaled components of several eigenvectors concatenated in index order.

    With ``symmetric=True`` each vector contributes both ``v`` and ``-v``.
    Eigenvector signs are arbitrary, and the largest-component-positive
    convention pushes every vector's extreme component into the right tail;
    pooling both signs removes that bias before comparing with a symmetric
    reference such as the standard normal.
    """
    indices = list(indices)
    if not indices:
        return np.empty(0)
    pooled = np.concatenate([scaled_components(spec, k) for k in indices])
    return np.concatenate([pooled, -pooled]) if symmetric else pooled


def gaussian_reference_ks(spec: SpectralDecomposition, indices, n_draws: int = 10_000, seed: int = 0) -> KsResult:
    """KS test of pooled scaled components against standard-normal draws.

    The pooled sample is sign-symmetrised (see :func:`pooled_components`).
    """
    reference = np.random.default_rng(seed).standard_normal(n_draws)
    return ks_two_sample(pooled_components(spec, indices, symmetric=True), reference)


def kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution,
    ``2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2)``.
    """
    if x <= 0:
        return 1.0
    total = 0.0
    for j in range(1, KS_SERIES_TERMS + 1):
        term = math.exp(-2.0 * j * j * x * x)
        total += term if j % 2 else -term
        if term <= KS_SERIES_TOL * abs(total):
            break
    else:
        # series has not settled: x is tiny and the survival is 1 to double precision
        return 1.0
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(a, b) -> KsResult:
    """Two-sided two-sample Kolmogorov-Smirnov test.

    The statistic is the sup distance between the empirical CDFs; the
    p-value comes from the asymptotic Kolmogorov distribution at
    ``sqrt(n_a n_b / (n_a + n_b)) * D``.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise DomainError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / n_a
    cdf_b = np.searchsorted(b, grid, side="right") / n_b
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = n_a * n_b / (n_a + n_b)
    return KsResult(d, kolmogorov_sf(math.sqrt(en) * d), n_a, n_b)


def bulk_vs_deviating_ks(spec: SpectralDecomposition, partition: BulkPartition) -> KsResult | None:
    """KS test between pooled bulk and pooled deviating eigenvector components.

    ``None`` when either group is empty.
    """
    if not partition.bulk_indices or not partition.deviating_indices:
        return None
    return ks_two_sample(
        pooled_components(spec, partition.bulk_indices),
        pooled_components(spec, partition.deviating_indices),
    )


def ipr(spec: SpectralDecomposition) -> IprSeries:
    """Inverse participation ratio ``sum_l u_l^4`` of each unit eigenvector."""
    values = np.sum(spec.eigenvectors**4, axis=0)
    return IprSeries(values, float(values.mean()))
