"""
Poisson regression smoothing of binned counts.

Counts ``y_i`` on the x grid are modeled as independent ``Poi(exp(X_i alpha))``;
the fitted marginal is ``f = mu / sum(mu)``.  Conditioning on the total turns
the Poisson fit into a multinomial one with the same ``f``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError, NumericalError
from .grid import check_grid, grid_step
from .splines import check_full_rank

F_FLOOR = 1e-12


@dataclass(frozen=True)
class CountVector:
    """Binned observation counts on an x grid.

    Attributes
    ----------
    x : ndarray
        Bin centers.
    y : ndarray of int
        Counts per bin.
    n_clamped : int
        Observations that fell outside the grid and were assigned to an end bin.
    """

    x: np.ndarray
    y: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1 or y.size != np.asarray(self.x).size:
            raise DataError("count vector length must match the x grid")
        if np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0)):
            raise DataError("counts must be nonnegative integers")
        if y.sum() < 1:
            raise DataError("count vector is empty (N = 0)")
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))

    @property
    def N(self):
        return int(self.y.sum())


def bin_observations(raw, x):
    """Assign each raw value to the nearest center of the equally spaced grid `x`.

    Values beyond half a bin outside the grid are clamped to the end bins and
    counted in ``n_clamped``.
    """
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0:
        raise DataError("no observations to bin")
    if not np.all(np.isfinite(raw)):
        raise DataError("observations contain non-finite values")
    x = check_grid(x, "x grid", min_length=2)
    step = grid_step(x)
    pos = np.floor((raw - x[0]) / step + 0.5).astype(np.int64)
    outside = (pos < 0) | (pos >= x.size)
    idx = np.clip(pos, 0, x.size - 1)
    return CountVector(x, np.bincount(idx, minlength=x.size), int(outside.sum()))


@dataclass(frozen=True)
class PoissonFit:
    """Fitted Poisson regression.

    Attributes
    ----------
    alpha : ndarray
        Coefficients.
    mu : ndarray
        Fitted Poisson means ``exp(X alpha)``.
    fhat : ndarray
        Fitted marginal ``mu / mu.sum()``.
    X : ndarray
        Design matrix used.
    N : int
        Total count.
    deviance : float
    iterations : int
    grad_norm : float
        Infinity norm of the score at termination.
    loglik_trace : tuple of float
        Log-likelihood after each accepted step.
    """

    alpha: np.ndarray
    mu: np.ndarray
    fhat: np.ndarray
    X: np.ndarray
    N: int
    deviance: float
    iterations: int
    grad_norm: float
    loglik_trace: tuple = field(default=(), repr=False)

    @property
    def delta(self):
        return delta_covariance(self)

    def summary(self):
        return {
            "alpha": [float(a) for a in self.alpha],
            "deviance": float(self.deviance),
            "iterations": int(self.iterations),
            "grad_norm": float(self.grad_norm),
            "N": int(self.N),
        }


def _loglik(y, eta):
    return float(y @ eta - np.exp(eta).sum())


def poisson_deviance(y, mu):
    """Poisson deviance ``2 sum(y log(y/mu) - (y - mu))`` with ``0 log 0 = 0``."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    ratio = np.where(y > 0, y / mu, 1.0)
    return float(2.0 * np.sum(y * np.log(ratio) - (y - mu)))


def fit_poisson_glm(counts, X, max_iter=100, grad_tol=1e-8, dev_rtol=1e-10):
    """Maximum likelihood Poisson regression by damped Newton steps.

    Parameters
    ----------
    counts : CountVector or array_like
        Counts ``y``.
    X : BasisMatrix or array_like, shape (n, p)
        Structure matrix, ideally containing an intercept column.
    max_iter : int
        Newton iteration cap.
    grad_tol : float
        Stop once the score's infinity norm falls below this.
    dev_rtol : float
        Alternatively stop once the relative change in deviance falls below this.

    Returns
    -------
    PoissonFit

    Raises
    ------
    ConvergenceError
        If neither criterion is met within `max_iter` iterations.
    """
    y = np.asarray(counts.y if isinstance(counts, CountVector) else counts, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise DataError(f"{y.size} counts for a design with {n} rows")
    if n < p:
        raise ConfigError("design has more columns than rows")
    check_full_rank(X)
    N = y.sum()
    if N <= 0:
        raise DataError("total count must be positive")

    alpha = np.linalg.lstsq(X, np.log(y + 0.5), rcond=None)[0]
    eta = X @ alpha
    ll = _loglik(y, eta)
    dev = poisson_deviance(y, np.exp(eta))
    trace = [ll]
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        mu = np.exp(eta)
        score = X.T @ (y - mu)
        hess = X.T @ (mu[:, None] * X)
        try:
            step = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Poisson information matrix") from exc
        t = 1.0
        for _ in range(50):
            cand = alpha + t * step
            eta_c = X @ cand
            if np.all(np.isfinite(eta_c)) and eta_c.max() < 700:
                ll_c = _loglik(y, eta_c)
                if ll_c >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
        else:
            raise ConvergenceError(
                "step halving failed in Poisson regression",
                {"iterations": it, "grad_norm": float(np.abs(score).max())},
            )
        ll_new = max(ll_c, ll)
        alpha, eta = cand, eta_c
        dev_new = poisson_deviance(y, np.exp(eta))
        grad_norm = float(np.abs(X.T @ (y - np.exp(eta))).max())
        trace.append(ll_new)
        rel = abs(dev - dev_new) / max(abs(dev_new), 1e-300)
        ll, dev = ll_new, dev_new
        if grad_norm < grad_tol or rel < dev_rtol:
            mu = np.exp(eta)
            return PoissonFit(alpha, mu, mu / mu.sum(), X, int(N), dev, it, grad_norm, tuple(trace))
    raise ConvergenceError(
        f"Poisson regression did not converge in {max_iter} iterations",
        {"iterations": max_iter, "grad_norm": grad_norm, "deviance": dev},
    )


def delta_covariance(fit, X=None):
    """Asymptotic covariance factor of ``fhat`` (covariance times ``N``).

    With ``G = X' diag(f) X`` and ``M = diag(f) X G^{-1} X' diag(f)`` this is
    ``J M J'`` where ``J = I - f 1'`` accounts for normalizing ``mu`` to ``f``.
    When ``X`` has an intercept it equals ``M - f f'``.  The correction is
    annihilated by any ``f``-centered vector, so delta-method variances of
    ratio estimates are unchanged, and for ``X = I`` the result is the
    multinomial ``diag(f) - f f'``.
    """
    f = np.maximum(np.asarray(fit.fhat if isinstance(fit, PoissonFit) else fit, float), F_FLOOR)
    if X is None:
        X = fit.X
    X = np.asarray(X, dtype=float)
    G = X.T @ (f[:, None] * X)
    try:
        H = np.linalg.solve(G, X.T * f)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular G_f = X' diag(f) X") from exc
    M = (f[:, None] * X) @ H
    Mf = M.sum(axis=1)
    delta = M - np.outer(Mf, f) - np.outer(f, Mf) + np.outer(f, f) * Mf.sum()
    return 0.5 * (delta + delta.T)
