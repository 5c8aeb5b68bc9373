import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from corrnet.correlation import CorrelationMatrix, correlation_matrix
from corrnet.errors import DomainError
from corrnet.market_data import synthesize_panel
from corrnet.returns import ReturnMatrix, log_returns, normalize_returns
from corrnet.spectra import (
    SpectralDecomposition,
    bulk_vs_deviating_ks,
    classify_eigenvalues,
    eigendecompose,
    gaussian_reference_ks,
    ipr,
    kolmogorov_sf,
    ks_two_sample,
    mp_bounds,
    mp_density,
    pooled_components,
    scaled_components,
)


def gram_correlation(seed, n, t):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(n, t)) + rng.normal(size=(1, t)) * rng.uniform(0, 1)
    return correlation_matrix(normalize_returns(ReturnMatrix([f"a{i}" for i in range(n)], G)))


def panel_spectrum(seed, n, t, factors=0, scale=0.0):
    p = synthesize_panel(seed, n, t, factors, scale)
    return eigendecompose(correlation_matrix(normalize_returns(log_returns(p))))


def test_identity_eigenvalues():
    s = eigendecompose(CorrelationMatrix(list("abc"), np.eye(3)))
    assert s.eigenvalues.tolist() == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("rho", [0.3, -0.6, 0.95])
def test_two_by_two_analytic(rho):
    s = eigendecompose(CorrelationMatrix(["a", "b"], [[1, rho], [rho, 1]]))
    assert s.eigenvalues == pytest.approx(sorted([1 + rho, 1 - rho], reverse=True), abs=1e-14)
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    top = plus if rho > 0 else minus
    assert abs(s.eigenvectors[:, 0] @ top) == pytest.approx(1.0, abs=1e-14)


def test_reconstruction_and_invariants():
    c = gram_correlation(0, 8, 20)
    s = eigendecompose(c)
    V, lam = s.eigenvectors, s.eigenvalues
    assert np.max(np.abs(V @ np.diag(lam) @ V.T - c.values)) <= 1e-9
    assert abs(lam.sum() - 8) <= 1e-8 * 8
    assert np.all(np.diff(lam) <= 0)
    assert np.max(np.abs(V.T @ V - np.eye(8))) <= 1e-10
    for k in range(8):
        assert np.linalg.norm(c.values @ V[:, k] - lam[k] * V[:, k]) <= 1e-8
        assert V[np.argmax(np.abs(V[:, k])), k] > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30))
def test_trace_residual_ipr_properties(seed, n):
    c = gram_correlation(seed, n, n + 3)
    s = eigendecompose(c)
    assert abs(s.eigenvalues.sum() - n) <= 1e-8 * n
    resid = np.linalg.norm(c.values @ s.eigenvectors - s.eigenvectors * s.eigenvalues, axis=0)
    assert resid.max() <= 1e-8
    values = ipr(s).values
    assert np.all(values >= 1 / n - 1e-12) and np.all(values <= 1 + 1e-12)


def test_decomposition_is_bitwise_repeatable():
    c = gram_correlation(5, 40, 100)
    a, b = eigendecompose(c), eigendecompose(c)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


def test_mp_bounds_at_q_2_5():
    b = mp_bounds(2.5)
    assert b.lambda_minus == pytest.approx(0.135, abs=1e-3)
    assert b.lambda_plus == pytest.approx(2.665, abs=1e-3)


@pytest.mark.parametrize("q", [sp.Integer(1), sp.Rational(5, 2), sp.Integer(4)])
def test_mp_bounds_formula_identity(q):
    lo = 1 + 1 / q - 2 * sp.sqrt(1 / q)
    hi = 1 + 1 / q + 2 * sp.sqrt(1 / q)
    # same support in the (1 -+ 1/sqrt(Q))^2 form
    assert sp.simplify(lo - (1 - 1 / sp.sqrt(q)) ** 2) == 0
    assert sp.simplify(hi - (1 + 1 / sp.sqrt(q)) ** 2) == 0
    b = mp_bounds(float(q))
    assert b.lambda_minus == pytest.approx(float(lo), abs=1e-15)
    assert b.lambda_plus == pytest.approx(float(hi), abs=1e-15)


def test_mp_bounds_exact_cases_and_errors():
    assert (mp_bounds(1).lambda_minus, mp_bounds(1).lambda_plus) == (0.0, 4.0)
    assert (mp_bounds(4).lambda_minus, mp_bounds(4).lambda_plus) == (0.25, 2.25)
    b = mp_bounds(4, sigma_sq=2.0)
    assert (b.lambda_minus, b.lambda_plus) == (0.5, 4.5)
    with pytest.raises(DomainError):
        mp_bounds(0.9)
    with pytest.raises(DomainError):
        mp_bounds(2, sigma_sq=0)


def test_mp_density_support():
    b = mp_bounds(2.5)
    assert mp_density(b.lambda_minus / 2, 2.5) == 0.0
    assert mp_density(b.lambda_plus + 0.1, 2.5) == 0.0
    assert mp_density(b.lambda_minus, 2.5) == 0.0
    assert mp_density(b.lambda_plus, 2.5) == 0.0
    assert mp_density(1.0, 2.5) > 0
    assert mp_density(np.array([0.0, 1.0]), 2.5).shape == (2,)


@pytest.mark.parametrize("q", [1.5, 2.5, 5.0])
@pytest.mark.parametrize("sigma_sq", [1.0, 0.5])
def test_mp_density_integrates_to_one(q, sigma_sq):
    b = mp_bounds(q, sigma_sq)
    total, err = integrate.quad(mp_density, b.lambda_minus, b.lambda_plus, args=(q, sigma_sq), limit=200)
    assert abs(total - 1.0) <= 1e-6


def _spec(eigenvalues):
    n = len(eigenvalues)
    return SpectralDecomposition([f"a{i}" for i in range(n)], eigenvalues, np.eye(n))


def test_classify_eigenvalues_examples():
    part = classify_eigenvalues(_spec([3.0, 1.0, 0.05]), mp_bounds(2.5))
    assert part.bulk_indices == (1,)
    assert part.deviating_indices == (0, 2)
    assert (part.n_above, part.n_below) == (1, 1)
    assert classify_eigenvalues(_spec([1.0] * 4), mp_bounds(2.5)).bulk_indices == (0, 1, 2, 3)


def test_classify_uses_closed_interval():
    b = mp_bounds(4)
    part = classify_eigenvalues(_spec([2.25, 1.0, 0.25]), b)
    assert part.deviating_indices == ()


def test_factor_panel_largest_eigenvalue_deviates():
    s = panel_spectrum(7, 20, 100, 1, 0.8)
    assert s.lambda_max > mp_bounds(100 / 20).lambda_plus
    part = classify_eigenvalues(s, mp_bounds(5.0))
    assert 0 in part.deviating_indices


def test_scaled_components_examples():
    n = 4
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]) / 2.0
    s = SpectralDecomposition(list("abcd"), [1, 1, 1, 1], H)
    assert scaled_components(s, 0).tolist() == [1.0, 1.0, 1.0, 1.0]
    e = SpectralDecomposition(list("abcd"), [1, 1, 1, 1], np.eye(n))
    assert scaled_components(e, 0).tolist() == [2.0, 0.0, 0.0, 0.0]
    with pytest.raises(IndexError):
        scaled_components(e, 4)


def test_pooled_components_symmetric_has_zero_mean():
    s = panel_spectrum(1, 30, 90)
    x = pooled_components(s, range(5), symmetric=True)
    assert len(x) == 2 * 5 * 30
    assert x.sum() == pytest.approx(0.0, abs=1e-10)


def test_bulk_eigenvector_passes_gaussian_reference():
    s = panel_spectrum(3, 50, 125)
    part = classify_eigenvalues(s, mp_bounds(2.5))
    assert not gaussian_reference_ks(s, part.bulk_indices, seed=99).rejects(0.01)


def test_ks_identical_samples():
    r = ks_two_sample([0.3, 1.2, -0.5], [0.3, 1.2, -0.5])
    assert r.statistic == 0.0 and r.p_value == 1.0


def test_ks_hand_computed():
    assert ks_two_sample([1, 2, 3], [1, 2, 10]).statistic == pytest.approx(1 / 3, abs=1e-15)


def test_ks_separated_distributions():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(100)
    r = ks_two_sample(a, a + 5)
    assert r.statistic >= 0.95 and r.p_value < 1e-6


def test_ks_empty_is_error():
    with pytest.raises(DomainError):
        ks_two_sample([], [1.0])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=60),
    st.lists(st.floats(-10, 10), min_size=1, max_size=60),
)
def test_ks_matches_scipy_and_is_symmetric(a, b):
    r, rev = ks_two_sample(a, b), ks_two_sample(b, a)
    assert r.statistic == rev.statistic and r.p_value == rev.p_value
    assert 0 <= r.statistic <= 1 and 0 <= r.p_value <= 1
    # sup |F_a - F_b| attained at a sample point; count directly
    ecdf_gap = max(abs(sum(x <= t for x in a) / len(a) - sum(x <= t for x in b) / len(b)) for t in a + b)
    assert r.statistic == pytest.approx(ecdf_gap, abs=1e-12)
    en = len(a) * len(b) / (len(a) + len(b))
    assert r.p_value == pytest.approx(special.kolmogorov(math.sqrt(en) * r.statistic), abs=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.01, 0.2, 0.5, 1.0, 1.36, 2.0, 4.0, 8.0])
def test_kolmogorov_sf_matches_scipy(x):
    assert kolmogorov_sf(x) == pytest.approx(special.kolmogorov(x), abs=1e-12)


def test_bulk_vs_deviating_none_without_deviations():
    s = _spec([1.0, 1.0, 1.0])
    assert bulk_vs_deviating_ks(s, classify_eigenvalues(s, mp_bounds(2.5))) is None


@pytest.mark.parametrize("n", [4, 16, 64, 100])
def test_ipr_uniform_vector(n):
    V = np.zeros((n, n))
    V[:, 0] = 1 / math.sqrt(n)
    V[0, 1:] = 1.0
    values = ipr(SpectralDecomposition([str(i) for i in range(n)], np.ones(n), V)).values
    assert abs(values[0] - 1 / n) <= 1e-15
    if n in (4, 16, 64):
        assert values[0] == 1 / n


def test_ipr_basis_vector():
    s = _spec([1.0, 1.0, 1.0])
    assert ipr(s).values.tolist() == [1.0, 1.0, 1.0]
    assert ipr(s).mean_ipr == 1.0


def test_null_panel_mean_ipr_near_three_over_n():
    s = panel_spectrum(11, 50, 125)
    assert 2 / 50 <= ipr(s).mean_ipr <= 4 / 50
