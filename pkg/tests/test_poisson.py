import numpy as np
import pytest

from ebayes.errors import ConfigError, ConvergenceError, DataError
from ebayes.grid import make_grid
from ebayes.poisson import (
    CountVector,
    bin_observations,
    delta_covariance,
    fit_poisson_glm,
    poisson_deviance,
)
from ebayes.splines import natural_spline_basis


def irls_oracle(y, X, iters=100):
    """Textbook IRLS: weighted least squares on the working response."""
    beta = np.zeros(X.shape[1])
    beta[0] = np.log(y.mean())
    for _ in range(iters):
        eta = X @ beta
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        w = np.sqrt(mu)
        beta_new = np.linalg.lstsq(X * w[:, None], z * w, rcond=None)[0]
        if np.max(np.abs(beta_new - beta)) < 1e-13:
            beta = beta_new
            break
        beta = beta_new
    mu = np.exp(X @ beta)
    return 2 * np.sum(np.where(y > 0, y * np.log(np.where(y > 0, y, 1) / mu), 0) - (y - mu))


def test_binning_rules():
    x = make_grid(-1, 1, 0.05)
    assert bin_observations(x, x).y.tolist() == [1] * x.size
    c = bin_observations([0.01, 0.02], x)
    assert c.y[np.argmin(np.abs(x))] == 2 and c.N == 2
    c = bin_observations([-5.0, 0.0, 1.02, 1.03, 9.0], x)
    assert c.n_clamped == 3
    assert c.y[0] == 1 and c.y[-1] == 3


def test_binning_rejects_empty_and_nan():
    x = make_grid(0, 1, 0.1)
    with pytest.raises(DataError):
        bin_observations([], x)
    with pytest.raises(DataError):
        bin_observations([0.1, np.nan], x)


def test_count_vector_validation():
    with pytest.raises(DataError):
        CountVector(np.arange(3.0), [0, 0, 0])
    with pytest.raises(DataError):
        CountVector(np.arange(3.0), [1, -1, 2])
    with pytest.raises(DataError):
        CountVector(np.arange(3.0), [1, 2])


def test_intercept_only_gives_uniform(rng):
    y = rng.poisson(7, 20)
    fit = fit_poisson_glm(y, np.ones((20, 1)))
    np.testing.assert_allclose(fit.fhat, 1 / 20, rtol=1e-10)
    np.testing.assert_allclose(fit.mu, y.sum() / 20, rtol=1e-10)


def test_identity_design_is_saturated(rng):
    y = rng.poisson(30, 8) + 1
    fit = fit_poisson_glm(y, np.eye(8))
    np.testing.assert_allclose(fit.fhat, y / y.sum(), rtol=1e-9)
    assert fit.deviance < 1e-9


def test_deviance_matches_irls_oracle(fig1):
    rng = np.random.default_rng(5)
    y = rng.multinomial(5000, fig1.marginal / fig1.marginal.sum())
    X = natural_spline_basis(fig1.model.x, 5, intercept=True).X
    fit = fit_poisson_glm(y, X)
    assert abs(fit.deviance - irls_oracle(y.astype(float), X)) < 1e-6
    assert abs(fit.fhat.sum() - 1) < 1e-12
    assert np.abs(fit.mu.sum() - y.sum()) < 1e-6 * y.sum()
    assert fit.grad_norm < 1e-8 or fit.iterations < 100


def test_loglik_trace_nondecreasing(fig1):
    rng = np.random.default_rng(11)
    y = rng.multinomial(800, fig1.marginal / fig1.marginal.sum())
    fit = fit_poisson_glm(y, natural_spline_basis(fig1.model.x, 6, intercept=True).X)
    trace = np.array(fit.loglik_trace)
    assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1]))


def test_multinomial_duality():
    y = np.array([3.0, 9.0, 14.0, 6.0, 2.0])
    x = np.arange(5.0)
    X = np.column_stack([np.ones(5), x, x**2])
    fit = fit_poisson_glm(y, X)
    # multinomial logit over the same column space; the intercept drops out
    Z, N, beta = X[:, 1:], y.sum(), np.zeros(2)
    for _ in range(100):
        eta = Z @ beta
        f = np.exp(eta - eta.max())
        f /= f.sum()
        grad = Z.T @ (y - N * f)
        H = N * Z.T @ ((np.diag(f) - np.outer(f, f)) @ Z)
        beta = beta + np.linalg.solve(H, grad)
    eta = Z @ beta
    f = np.exp(eta - eta.max())
    np.testing.assert_allclose(fit.fhat, f / f.sum(), atol=1e-8)


def test_poisson_deviance_zero_counts():
    assert poisson_deviance([0, 2], [1.0, 2.0]) == pytest.approx(2.0)


def test_failures_are_explicit(rng):
    y = rng.poisson(5, 30) + 1
    X = np.column_stack([np.ones(30), np.linspace(0, 1, 30)])
    with pytest.raises(ConvergenceError) as info:
        fit_poisson_glm(y, X, max_iter=1, grad_tol=0, dev_rtol=0)
    assert "iterations" in info.value.diagnostics
    with pytest.raises(ConfigError):
        fit_poisson_glm(y, np.column_stack([X, X[:, 1]]))
    with pytest.raises(DataError):
        fit_poisson_glm(y[:-1], X)


def test_delta_structure(fig1):
    rng = np.random.default_rng(2)
    y = rng.multinomial(3000, fig1.marginal / fig1.marginal.sum())
    fit = fit_poisson_glm(y, natural_spline_basis(fig1.model.x, 5, intercept=True).X)
    D = fit.delta
    np.testing.assert_allclose(D, D.T, atol=1e-15)
    assert abs(D.sum()) < 1e-8
    assert np.abs(D.sum(axis=1)).max() < 1e-8
    assert np.linalg.eigvalsh(D).min() > -1e-12


def test_delta_identity_design_is_multinomial(rng):
    f = rng.dirichlet(np.ones(6))
    D = delta_covariance(f, np.eye(6))
    np.testing.assert_allclose(D, np.diag(f) - np.outer(f, f), atol=1e-14)


def test_delta_matches_parametric_bootstrap():
    """Monte-Carlo covariance of fhat on a 3-bin, 2-parameter model."""
    X = np.array([[1.0, -1.0], [1.0, 0.0], [1.0, 1.0]])
    f = np.exp(0.4 * X[:, 1])  # inside the log-linear family
    f /= f.sum()
    N, R = 4000, 100_000
    rng = np.random.default_rng(7)
    Y = rng.multinomial(N, f, size=R).astype(float)
    # batched Newton for the Poisson fits
    A = np.linalg.lstsq(X, np.log(Y.T + 0.5), rcond=None)[0].T
    for _ in range(30):
        mu = np.exp(A @ X.T)
        score = (Y - mu) @ X
        H = np.einsum("ri,ij,ik->rjk", mu, X, X)
        A = A + np.linalg.solve(H, score[..., None])[..., 0]
    mu = np.exp(A @ X.T)
    fhat = mu / mu.sum(axis=1, keepdims=True)
    mc = np.cov(fhat.T) * N
    D = delta_covariance(f, X)
    scale = np.abs(D).max()
    assert np.abs(mc - D).max() < 0.02 * scale
