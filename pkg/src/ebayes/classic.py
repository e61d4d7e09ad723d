"""
Classic empirical Bayes estimators computed from the marginal alone.

Robbins' Poisson rule, Tweedie's formula, James-Stein shrinkage, and local
false discovery rates, plus a g-model fdr for comparison.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, DataError, NumericalError
from .fmodel import theorem3_accuracy
from .gmodel import gmodel_posterior
from .grid import check_grid, grid_step
from .poisson import F_FLOOR, PoissonFit


def robbins_estimate(fhat, x):
    """Robbins' rule ``(x + 1) fhat[x + 1] / fhat[x]`` on Poisson support ``0, 1, 2, ...``.

    A missing ``fhat[x + 1]`` is treated as zero with a warning.
    """
    fhat = np.asarray(fhat, dtype=float)
    x = int(x)
    if x < 0 or x >= fhat.size:
        raise DataError(f"count {x} is outside the frequency vector")
    if not fhat[x] > 0:
        raise NumericalError(f"fhat[{x}] is zero; Robbins' estimate is undefined")
    if x + 1 >= fhat.size:
        warnings.warn(f"fhat[{x + 1}] missing, treated as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return (x + 1) * fhat[x + 1] / fhat[x]


def _fhat(fit):
    f = fit.fhat if isinstance(fit, PoissonFit) else np.asarray(fit, dtype=float)
    if np.any(f <= 0):
        raise NumericalError("fitted marginal must be strictly positive")
    return f


@dataclass(frozen=True)
class TweedieCurve:
    """Tweedie estimates ``x + l'(x)`` on a grid.

    Attributes
    ----------
    x : ndarray
    estimate : ndarray
    log_marginal : ndarray
        ``log fhat`` (up to an additive constant).
    derivative : ndarray
        Finite-difference ``d/dx log fhat``.
    sd : ndarray or None
        Delta-method sd of the estimate under the Poisson regression model.
    """

    x: np.ndarray
    estimate: np.ndarray
    log_marginal: np.ndarray
    derivative: np.ndarray
    sd: np.ndarray = None

    def at(self, value):
        """Estimate at an arbitrary `value`; linear extrapolation beyond the grid ends."""
        value = np.asarray(value, dtype=float)
        x, e = self.x, self.estimate
        out = np.interp(value, x, e)
        lo_slope = (e[1] - e[0]) / (x[1] - x[0])
        hi_slope = (e[-1] - e[-2]) / (x[-1] - x[-2])
        out = np.where(value < x[0], e[0] + lo_slope * (value - x[0]), out)
        out = np.where(value > x[-1], e[-1] + hi_slope * (value - x[-1]), out)
        return out if out.ndim else float(out)


def difference_matrix(n, step):
    """``D`` with ``D @ v`` the central-difference derivative.

    The end rows use second-order one-sided stencils, matching
    ``np.gradient(v, step, edge_order=2)``; both are exact for quadratics.
    """
    if n < 3:
        raise ConfigError("need at least 3 grid points to differentiate")
    D = np.zeros((n, n))
    for i in range(1, n - 1):
        D[i, i - 1], D[i, i + 1] = -0.5 / step, 0.5 / step
    D[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * step)
    D[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2 * step)
    return D


def tweedie_curve(fit, x, with_sd=False, N=None):
    """Tweedie's formula ``E{theta|x} = x + d/dx log f(x)`` with a plug-in ``fhat``.

    Parameters
    ----------
    fit : PoissonFit or array_like
        Fitted (or exact) marginal on the equally spaced grid `x`.
    x : array_like
    with_sd : bool
        Add delta-method sds; needs a :class:`PoissonFit` for its structure matrix.
    N : float, optional
        Sample size for the sds; defaults to the fit's total count.
    """
    x = check_grid(x, "x grid", min_length=3)
    f = _fhat(fit)
    if f.shape != x.shape:
        raise ConfigError("marginal does not match the x grid")
    step = grid_step(x)
    logf = np.log(f)
    deriv = np.gradient(logf, step, edge_order=2)
    sd = None
    if with_sd:
        if not isinstance(fit, PoissonFit):
            raise ConfigError("standard deviations need a PoissonFit")
        N = fit.N if N is None else N
        D = difference_matrix(x.size, step)
        # d log fhat_i is an f-centered linear functional: W = D_i / f
        sd = np.array([theorem3_accuracy(D[i] / f, fit.X, f, N).cv for i in range(x.size)])
    return TweedieCurve(x, x + deriv, logf, deriv, sd)


def james_stein(X):
    """James-Stein shrinkage toward the grand mean.

    ``theta_k = xbar + (1 - (N - 3) / S) (X_k - xbar)`` with
    ``S = sum (X_k - xbar)^2``.
    """
    X = np.asarray(X, dtype=float)
    N = X.size
    if N < 4:
        raise DataError("James-Stein needs at least 4 observations")
    xbar = X.mean()
    S = float(((X - xbar) ** 2).sum())
    if S <= 0:
        raise DataError("all observations are equal (S = 0)")
    return xbar + (1.0 - (N - 3) / S) * (X - xbar)


@dataclass(frozen=True)
class FdrCurve:
    """Local false discovery rate values on a grid.

    Attributes
    ----------
    x : ndarray
    values : ndarray
        ufdr (with ``pi0 = 1``) or fdr.
    sd : ndarray or None
    pi0 : float
    kind : str
        ``"ufdr"``, ``"fdr"`` (rescaled ufdr) or ``"gmodel"``.
    """

    x: np.ndarray
    values: np.ndarray
    sd: np.ndarray = None
    pi0: float = 1.0
    kind: str = "ufdr"


def null_bin_probabilities(x, sigma=1.0):
    """``phi(x_i / sigma) dx / sigma``: null N(0, sigma^2) mass per bin."""
    x = check_grid(x, "x grid", min_length=2)
    return norm.pdf(x / sigma) / sigma * grid_step(x)


def ufdr_curve(fit, x, with_sd=False, N=None, null=None):
    """Upper false discovery rate ``phi(x) / fhat(x)``.

    Both numerator and denominator are bin probabilities.  With `with_sd`, the
    sd at each ``x_i`` follows the Poisson-regression delta method with
    ``U = phi(x_i) 1`` and ``V = e_i``, so ``W = 1 - e_i / f_i``.
    """
    x = check_grid(x, "x grid", min_length=2)
    f = _fhat(fit)
    null = null_bin_probabilities(x) if null is None else np.asarray(null, dtype=float)
    values = null / np.maximum(f, F_FLOOR)
    sd = None
    if with_sd:
        if not isinstance(fit, PoissonFit):
            raise ConfigError("standard deviations need a PoissonFit")
        N = fit.N if N is None else N
        sd = np.empty(x.size)
        for i in range(x.size):
            W = np.ones(x.size)
            W[i] -= 1.0 / f[i]
            sd[i] = theorem3_accuracy(W, fit.X, f, N, estimate=values[i]).sd
    return FdrCurve(x, values, sd, 1.0, "ufdr")


def pi0_from_max(curve):
    """``pi0 = 1 / max(ufdr)`` and the rescaled curve ``ufdr * pi0``."""
    values = np.asarray(curve.values if isinstance(curve, FdrCurve) else curve, dtype=float)
    top = values.max()
    if not top > 0:
        raise NumericalError("ufdr curve has no positive value")
    pi0 = 1.0 / top
    if isinstance(curve, FdrCurve):
        sd = None if curve.sd is None else curve.sd * pi0
        return pi0, FdrCurve(curve.x, values * pi0, sd, pi0, "fdr")
    return pi0, values * pi0


def fdr_curve_gmodel(fit, spec, x=None, N=None, null_at=0.0):
    """g-model fdr: posterior probability of ``theta = null_at`` with ``theorem4_accuracy`` sds."""
    j0 = int(np.argmin(np.abs(spec.theta - null_at)))
    if abs(spec.theta[j0] - null_at) > 1e-9:
        raise ConfigError(f"{null_at} is not on the theta grid")
    t = np.zeros(spec.theta.size)
    t[j0] = 1.0
    res = gmodel_posterior(spec, fit, t, N)
    values = np.array([0.0 if r is None else r.estimate for r in res])
    sd = np.array([0.0 if r is None else r.sd for r in res])
    g = fit.g if hasattr(fit, "g") else None
    pi0 = float(g[j0]) if g is not None else float("nan")
    xs = np.arange(spec.P.shape[0], dtype=float) if x is None else np.asarray(x, dtype=float)
    return FdrCurve(xs, values, sd, pi0, "gmodel")
