import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrnet.correlation import (
    CorrelationMatrix,
    correlation_histogram,
    correlation_matrix,
    distance_matrix,
    read_matrix,
    write_matrix,
)
from corrnet.errors import DegenerateError, DomainError
from corrnet.returns import ReturnMatrix, normalize_returns


def _norm(rows, ids=None):
    rows = np.asarray(rows, dtype=float)
    return normalize_returns(ReturnMatrix(ids or [f"a{i}" for i in range(len(rows))], rows))


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def random_correlation(seed, n, t=None):
    rng = np.random.default_rng(seed)
    t = t or 2 * n + 5
    mix = rng.normal(size=(n, n)) * rng.uniform(0, 1)
    return correlation_matrix(_norm(mix @ rng.normal(size=(n, t)) + rng.normal(size=(n, t))))


def test_identical_rows_fully_correlated():
    row = [0.1, -0.3, 0.2, 0.05]
    C = correlation_matrix(_norm([row, row])).values
    assert np.allclose(C, [[1.0, 1.0], [1.0, 1.0]], rtol=0, atol=1e-15)
    assert np.all(np.diag(C) == 1.0)


def test_negated_row_anticorrelated():
    row = np.array([0.1, -0.3, 0.2, 0.05])
    C = correlation_matrix(_norm([row, -row])).values
    assert C[0, 1] == pytest.approx(-1.0, abs=1e-15)


def test_matches_pairwise_pearson(rng):
    G = rng.normal(size=(6, 40))
    C = correlation_matrix(_norm(G)).values
    for i in range(6):
        for j in range(6):
            assert abs(C[i, j] - pearson(G[i], G[j])) <= 1e-12


def test_invariants_and_determinism(rng):
    g = _norm(rng.normal(size=(30, 80)))
    a, b = correlation_matrix(g), correlation_matrix(g)
    assert a.values.tobytes() == b.values.tobytes()
    C = a.values
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 1.0)
    assert np.linalg.eigvalsh(C)[0] >= -1e-9


def test_needs_two_assets():
    with pytest.raises(DegenerateError):
        correlation_matrix(_norm([[1.0, 2.0, 3.0]]))


def test_rejects_invalid_matrices():
    with pytest.raises(DomainError):
        CorrelationMatrix(["a", "b"], [[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(DomainError):
        CorrelationMatrix(["a", "b"], [[1.0, 0.0], [0.0, 0.9]])
    with pytest.raises(DomainError):  # |rho| > 1 is not PSD
        CorrelationMatrix(["a", "b"], [[1.0, 1.5], [1.5, 1.0]])


@pytest.mark.parametrize("c, d", [(1.0, 0.0), (-1.0, 2.0), (0.0, math.sqrt(2.0))])
def test_distance_values(c, d):
    D = distance_matrix(CorrelationMatrix(["a", "b"], [[1.0, c], [c, 1.0]])).values
    assert D[0, 1] == pytest.approx(d, abs=1e-15)
    assert D[0, 0] == 0.0


def _triangle_violation(D):
    # D[i, j] - (D[i, k] + D[k, j]) over all triples
    return np.max(D[:, None, :] - (D[:, :, None] + D[None, :, :]))


@pytest.mark.parametrize("seed", range(10))
def test_distance_metric_axioms(seed):
    n = 3 + seed * 6
    D = distance_matrix(random_correlation(seed, n)).values
    assert np.array_equal(D, D.T)
    off = ~np.eye(n, dtype=bool)
    # identity axiom: D_ij = 0 iff i == j
    assert np.all(np.diag(D) == 0) and np.all(D[off] > 0)
    assert _triangle_violation(D) <= 1e-12


@pytest.mark.parametrize("row", [[0.3, -0.1, 0.2, -0.4, 0.0], [0.1, -0.3, 0.2, 0.05, 0.0]])
def test_duplicate_assets_clamp_to_zero_distance(row):
    D = distance_matrix(correlation_matrix(_norm([row, row, [1, 2, 0, 1, 3]]))).values
    assert D[0, 1] == 0.0
    assert D[0, 2] > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_distance_monotone_in_correlation(seed):
    c = random_correlation(seed, 6)
    d = distance_matrix(c)
    iu = np.triu_indices(6, 1)
    cv, dv = c.values[iu], d.values[iu]
    for a in range(len(cv)):
        for b in range(len(cv)):
            if cv[a] > cv[b]:
                assert dv[a] < dv[b] or math.isclose(cv[a], cv[b], abs_tol=1e-15)


def test_histogram_conserves_counts():
    c = random_correlation(3, 25)
    rows = correlation_histogram(c, bins=20)
    assert sum(r[2] for r in rows) == 25 * 24 // 2
    assert rows[0][0] == -1.0 and rows[-1][1] == 1.0


def test_matrix_export_round_trip(tmp_path):
    c = random_correlation(1, 5)
    write_matrix(c.asset_ids, c.values, tmp_path / "c.csv")
    ids, values = read_matrix(tmp_path / "c.csv")
    assert ids == c.asset_ids
    assert np.array_equal(values, c.values)
    buf = io.StringIO()
    write_matrix(c.asset_ids, c.values, buf)
    assert buf.getvalue().splitlines()[0] == "asset_id," + ",".join(c.asset_ids)
