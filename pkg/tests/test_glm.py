import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osumcs.glm import GlmFamily, SolverOptions, cumulant_derivs, fisher_info, fit_glm, weighted_score
from osumcs.scenarios import ScenarioSpec, generate

L, LOG, P = GlmFamily.LINEAR, GlmFamily.LOGISTIC, GlmFamily.POISSON


@pytest.mark.parametrize(
    "family, t, expected",
    [
        (LOG, 0.0, (math.log(2), 0.5, 0.25)),
        (L, 3.0, (4.5, 3.0, 1.0)),
        (P, 0.0, (1.0, 1.0, 1.0)),
    ],
)
def test_cumulant_examples(family, t, expected):
    assert cumulant_derivs(family, t) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_cumulant_rejects_nonfinite(bad):
    with pytest.raises(ValueError):
        cumulant_derivs(LOG, bad)


def test_logistic_variance_identity_on_grid():
    t = np.linspace(-30, 30, 601)
    mu = LOG.mean(t)
    assert np.all((mu > 0) & (mu < 1))
    # 1 - mu cancels badly for large t; b'(-t) is the same quantity without cancellation
    np.testing.assert_allclose(LOG.variance(t), mu * LOG.mean(-t), rtol=1e-12)
    np.testing.assert_allclose(LOG.variance(t), mu * (1 - mu), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("family", list(GlmFamily))
def test_variance_strictly_positive(family):
    t = np.linspace(-100, 100, 2001)
    assert np.all(family.variance(t) > 0)


def test_poisson_mean_equals_variance_and_clamps():
    t = np.array([-50.0, -1.0, 0.0, 2.0, 80.0])
    np.testing.assert_array_equal(P.mean(t), P.variance(t))
    assert np.isfinite(P.mean(np.array([1e6]))).all()
    assert P.mean(np.array([80.0]))[0] == P.mean(np.array([30.0]))[0]


def test_cumulant_derivatives_match_finite_differences():
    h = 1e-5
    for fam in GlmFamily:
        for t in (-2.0, -0.3, 0.0, 1.7):
            b, b1, b2 = cumulant_derivs(fam, t)
            assert b1 == pytest.approx((fam.b(t + h) - fam.b(t - h)) / (2 * h), rel=1e-6)
            assert b2 == pytest.approx((fam.mean(t + h) - fam.mean(t - h)) / (2 * h), rel=1e-6)


def test_weighted_score_examples():
    assert weighted_score(L, [0.0], [[1], [1]], [1, -1], [1, 1]) == pytest.approx([0.0])
    assert weighted_score(L, [1.0], [[2]], [5], [3]) == pytest.approx([18.0])
    assert weighted_score(LOG, [0.0], [[1], [1]], [1, 0], [1, 1]) == pytest.approx([0.0])


def test_weighted_score_errors():
    with pytest.raises(ValueError):
        weighted_score(L, [0.0], [[1], [1]], [1], [1, 1])
    with pytest.raises(ValueError):
        weighted_score(L, [0.0], [[1]], [1], [-1])
    with pytest.raises(ValueError):
        weighted_score(L, [0.0, 1.0], [[1]], [1], [1])


def test_fisher_info_examples():
    np.testing.assert_allclose(fisher_info(L, [7.0], [[1], [2]], [1, 1]), [[2.5]])
    np.testing.assert_allclose(fisher_info(LOG, [0.0], [[2]], [1]), [[1.0]])
    np.testing.assert_allclose(fisher_info(P, [0.0, 0.0], np.eye(2), [1, 1]), 0.5 * np.eye(2))
    with pytest.raises(ValueError):
        fisher_info(L, [0.0], [[1]], [0.0])


def test_fisher_info_symmetric_psd():
    rng = np.random.default_rng(3)
    for fam in GlmFamily:
        X = rng.normal(size=(300, 6))
        J = fisher_info(fam, rng.normal(size=6) * 0.3, X, rng.uniform(0, 2, 300))
        np.testing.assert_array_equal(J, J.T)
        assert np.linalg.eigvalsh(J).min() >= -1e-10 * np.trace(J)


def _wls(X, y, w):
    XtW = X.T * w
    return np.linalg.solve(XtW @ X, XtW @ y)


def test_linear_fit_matches_weighted_least_squares():
    rng = np.random.default_rng(11)
    for _ in range(25):
        p = int(rng.integers(1, 11))
        N = int(rng.integers(p + 5, 201))
        X = rng.normal(size=(N, p))
        y = X @ rng.normal(size=p) + rng.normal(size=N)
        w = rng.uniform(0.1, 5, N)
        fit = fit_glm(L, X, y, w)
        assert fit.converged
        assert np.max(np.abs(fit.beta - _wls(X, y, w))) < 1e-8


def test_logistic_balanced_symmetric_stays_at_zero():
    X = np.array([[-1.0], [1.0], [-1.0], [1.0], [-2.0], [2.0], [-2.0], [2.0]])
    y = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    fit = fit_glm(LOG, X, y, init=[0.0])
    assert fit.converged
    assert fit.iterations == 0
    np.testing.assert_array_equal(fit.beta, [0.0])


def test_converged_fit_has_small_score_and_psd_info():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(500, 4))
    y = rng.poisson(np.exp(X @ np.array([0.2, -0.1, 0.3, 0.0]))).astype(float)
    w = rng.uniform(0.5, 3, 500)
    fit = fit_glm(P, X, y, w)
    assert fit.converged and fit.score_norm <= 1e-8
    assert np.linalg.norm(weighted_score(P, fit.beta, X, y, w)) / w.sum() <= 1e-8
    np.testing.assert_array_equal(fit.info, fit.info.T)
    assert np.linalg.eigvalsh(fit.info).min() >= 0


def test_separable_logistic_reports_nonconvergence():
    X = np.column_stack([np.ones(20), np.linspace(-1, 1, 20)])
    y = (X[:, 1] > 0).astype(float)
    fit = fit_glm(LOG, X, y, opts=SolverOptions(max_iter=5))
    assert not fit.converged
    assert "5 iterations" in fit.message
    assert fit.score_norm > 1e-8


def test_fit_requires_enough_weighted_rows():
    with pytest.raises(ValueError):
        fit_glm(L, np.eye(3), [1, 2, 3], [1, 0, 0])


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.01, 100), seed=st.integers(0, 10_000))
def test_weight_scaling_scales_score_and_keeps_fit(c, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = (rng.random(60) < 0.5).astype(float)
    w = rng.uniform(0.2, 2, 60)
    beta = rng.normal(size=3) * 0.2
    np.testing.assert_allclose(
        weighted_score(LOG, beta, X, y, c * w), c * weighted_score(LOG, beta, X, y, w), rtol=1e-10, atol=1e-12
    )
    a = fit_glm(LOG, X, y, w)
    b = fit_glm(LOG, X, y, c * w)
    assert a.converged == b.converged
    if a.converged and b.converged:
        np.testing.assert_allclose(a.beta, b.beta, atol=1e-7)


@pytest.mark.slow
def test_full_data_logistic_fit_within_three_standard_errors():
    spec = ScenarioSpec("mzNormal", N=20000)
    ds = generate(spec, np.random.default_rng(2024))
    fit = fit_glm(LOG, ds.X, ds.responses.reveal_all())
    assert fit.converged
    # asymptotic covariance of the MLE is (N J)^{-1}
    se_bound = math.sqrt(np.trace(np.linalg.inv(fit.info)) / spec.N)
    assert np.linalg.norm(fit.beta - spec.beta0) < 3 * se_bound
