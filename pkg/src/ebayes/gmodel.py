"""
Exponential family models for the prior.

The prior is ``g(alpha) = exp(Q alpha - phi(alpha))`` on the theta grid, the
counts are multinomial with probabilities ``f(alpha) = P g(alpha)``.  This is a
curved exponential family in the counts, so the likelihood may have several
local maxima and is fitted from multiple starts.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .errors import ConfigError, ConvergenceError, DataError, NumericalError
from .fmodel import EstimateWithAccuracy
from .grid import check_grid
from .poisson import CountVector
from .splines import check_full_rank

F_FLOOR = 1e-12
SCORE_TOL = 1e-6


class ConditioningWarning(RuntimeWarning):
    """Floors or pseudo-inverses were needed to evaluate an information matrix."""


class ConvergenceWarning(RuntimeWarning):
    """An optimizer returned without meeting its tolerance."""


@dataclass(frozen=True)
class GModelSpec:
    """Model matrix ``Q`` on the theta grid together with the sampling matrix.

    Attributes
    ----------
    theta : ndarray, length m
    P : ndarray, shape (n, m)
    Q : ndarray, shape (m, q)
    spike_at : float or None
        Theta value carrying an indicator column, if any.
    """

    theta: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    spike_at: float = None

    def __post_init__(self):
        theta = check_grid(self.theta, "theta grid", min_length=2)
        P = np.asarray(self.P, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if P.ndim != 2 or P.shape[1] != theta.size:
            raise ConfigError("P columns must match the theta grid")
        if Q.ndim != 2 or Q.shape[0] != theta.size:
            raise ConfigError("Q rows must match the theta grid")
        if Q.shape[1] >= theta.size:
            raise ConfigError("Q must have fewer columns than grid points")
        check_full_rank(Q)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)

    @property
    def q(self):
        return self.Q.shape[1]

    @property
    def spike_index(self):
        if self.spike_at is None:
            return None
        j = int(np.argmin(np.abs(self.theta - self.spike_at)))
        if abs(self.theta[j] - self.spike_at) > 1e-9:
            raise ConfigError(f"spike {self.spike_at} is not on the theta grid")
        return j


def _alpha(spec, alpha):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (spec.q,):
        raise ConfigError(f"alpha must have length {spec.q}")
    if not np.all(np.isfinite(alpha)):
        raise ConfigError("alpha has non-finite entries")
    return alpha


def prior_from_alpha(spec, alpha):
    """``g(alpha) = exp(Q alpha - phi(alpha))``, computed with max subtraction."""
    eta = spec.Q @ _alpha(spec, alpha)
    g = np.exp(eta - logsumexp(eta))
    return g / g.sum()


def q_alpha(spec, g):
    """``D(g) Q`` with ``D(g) = diag(g) - g g'``: the Jacobian ``dg/dalpha``."""
    return g[:, None] * spec.Q - np.outer(g, g @ spec.Q)


def log_likelihood_and_score(spec, alpha, y):
    """Multinomial log-likelihood ``y' log f(alpha)`` and its gradient.

    The score is ``(y / f)' P D(g) Q``.  A bin with ``y_i > 0`` and
    ``f_i = 0`` gives ``-inf`` and a NaN gradient.
    """
    y = np.asarray(y.y if isinstance(y, CountVector) else y, dtype=float)
    g = prior_from_alpha(spec, alpha)
    f = spec.P @ g
    if y.shape != f.shape:
        raise DataError("counts do not match the x grid")
    pos = y > 0
    if np.any(f[pos] <= 0):
        return -math.inf, np.full(spec.q, np.nan)
    value = float(y[pos] @ np.log(f[pos]))
    ratio = np.zeros_like(f)
    ratio[pos] = y[pos] / f[pos]
    score = (ratio @ spec.P) @ q_alpha(spec, g)
    return value, score


def fisher_information(spec, alpha, N=1):
    """Fisher information ``N Q_a' P' diag(1/f) P Q_a`` for alpha.

    Marginal entries are floored at 1e-12 before taking reciprocals; a
    :class:`ConditioningWarning` is issued when the floor is active.
    """
    g = prior_from_alpha(spec, alpha)
    f = spec.P @ g
    if np.any(f < F_FLOOR):
        warnings.warn("marginal below 1e-12 floored in Fisher information", ConditioningWarning,
                      stacklevel=2)
        f = np.maximum(f, F_FLOOR)
    PQa = spec.P @ q_alpha(spec, g)
    info = N * (PQa.T @ (PQa / f[:, None]))
    return 0.5 * (info + info.T)


def _pinv_information(spec, g, info):
    """Pseudo-inverse of `info`, warning when a null direction moves ``g``."""
    vals, vecs = np.linalg.eigh(info)
    top = max(vals.max(), 0.0)
    keep = vals > 1e-10 * top
    if not keep.all():
        Qa = q_alpha(spec, g)
        moving = np.linalg.norm(Qa @ vecs[:, ~keep], axis=0) > 1e-8 * max(np.linalg.norm(Qa), 1e-300)
        if moving.any():
            warnings.warn("singular Fisher information; using pseudo-inverse", ConditioningWarning,
                          stacklevel=3)
    if not keep.any():
        raise NumericalError("Fisher information is zero")
    return (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T


def g_covariance(spec, alpha, N=1):
    """Approximate covariance ``Q_a I^{-1} Q_a'`` of ``g(alpha_hat)`` (``I`` carries ``N``)."""
    g = prior_from_alpha(spec, alpha)
    info = fisher_information(spec, alpha, N)
    Qa = q_alpha(spec, g)
    cov = Qa @ _pinv_information(spec, g, info) @ Qa.T
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class GModelFit:
    """Result of :func:`fit_mle`.

    Attributes
    ----------
    alpha : ndarray
    g : ndarray
        Fitted prior.
    f : ndarray
        ``P g``.
    N : int
    loglik : float
    score_norm : float
        Infinity norm of the score at ``alpha``.
    converged : bool
    restarts_used : int
    local_optima : list of dict
        ``{"start", "loglik", "score_norm", "alpha"}`` for every start.
    """

    spec: GModelSpec = field(repr=False)
    alpha: np.ndarray
    g: np.ndarray
    f: np.ndarray
    N: int
    loglik: float
    score_norm: float
    converged: bool
    restarts_used: int
    local_optima: list = field(default_factory=list, repr=False)

    @property
    def fisher(self):
        return fisher_information(self.spec, self.alpha, self.N)

    @property
    def cov_g(self):
        return g_covariance(self.spec, self.alpha, self.N)

    @property
    def pi0(self):
        j = self.spec.spike_index
        return None if j is None else float(self.g[j])

    def to_json(self):
        return {
            "alpha": [float(a) for a in self.alpha],
            "g_hat": [float(v) for v in self.g],
            "pi0_at_spike": self.pi0,
            "loglik": float(self.loglik),
            "converged": bool(self.converged),
            "restarts_used": int(self.restarts_used),
        }


def _newton_polish(spec, alpha, y, max_iter=50, h=1e-5):
    """Newton steps on the log-likelihood with a finite-difference Hessian of the score."""
    ll, score = log_likelihood_and_score(spec, alpha, y)
    for _ in range(max_iter):
        if np.abs(score).max() < SCORE_TOL:
            break
        hess = np.empty((spec.q, spec.q))
        for k in range(spec.q):
            e = np.zeros(spec.q)
            e[k] = h
            hess[:, k] = (log_likelihood_and_score(spec, alpha + e, y)[1]
                          - log_likelihood_and_score(spec, alpha - e, y)[1]) / (2 * h)
        hess = 0.5 * (hess + hess.T)
        vals, vecs = np.linalg.eigh(-hess)
        floor = 1e-10 * max(np.abs(vals).max(), 1e-300)
        vals = np.where(vals > floor, vals, np.inf)  # ascent only along concave directions
        step = vecs @ ((vecs.T @ score) / vals)
        t = 1.0
        while t > 1e-8:
            cand = alpha + t * step
            ll_c, score_c = log_likelihood_and_score(spec, cand, y)
            if np.isfinite(ll_c) and ll_c >= ll - 1e-13 * abs(ll):
                break
            t *= 0.5
        else:
            break
        alpha, ll, score = cand, ll_c, score_c
    return alpha, ll, score


def _single_start(spec, y, alpha0, maxiter):
    N = y.sum()

    def objective(a):
        val, grad = log_likelihood_and_score(spec, a, y)
        if not np.isfinite(val):
            return math.inf, np.zeros_like(a)
        return -val / N, -grad / N

    res = minimize(objective, alpha0, jac=True, method="BFGS",
                   options={"gtol": 1e-10, "maxiter": maxiter})
    if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
        return None
    return _newton_polish(spec, res.x, y)


def fit_mle(spec, y, restarts=5, seed=0, start_sd=0.5, maxiter=2000):
    """Maximum likelihood ``alpha`` from binned counts, by multi-start quasi-Newton.

    Start 0 is ``alpha = 0``; starts ``1..restarts-1`` are Gaussian with sd
    `start_sd`, each drawn from its own stream ``default_rng([seed, k])``.
    Every start runs BFGS on the analytic score followed by Newton polishing;
    the highest likelihood wins.

    Returns
    -------
    GModelFit
        ``converged`` is False (and a :class:`ConvergenceWarning` issued) when
        the best score's infinity norm is not below 1e-6.

    Raises
    ------
    ConvergenceError
        When no start produced a finite likelihood.
    """
    y = np.asarray(y.y if isinstance(y, CountVector) else y, dtype=float)
    if y.shape != (spec.P.shape[0],):
        raise DataError("counts do not match the x grid")
    if y.sum() <= 0:
        raise DataError("no observations")
    restarts = max(int(restarts), 1)
    optima = []
    best = None
    for k in range(restarts):
        if k == 0:
            alpha0 = np.zeros(spec.q)
        else:
            alpha0 = np.random.default_rng([int(seed), k]).normal(0.0, start_sd, spec.q)
        out = _single_start(spec, y, alpha0, maxiter)
        if out is None:
            optima.append({"start": k, "loglik": None, "score_norm": None, "alpha": None})
            continue
        alpha, ll, score = out
        snorm = float(np.abs(score).max())
        optima.append({"start": k, "loglik": float(ll), "score_norm": snorm,
                       "alpha": [float(a) for a in alpha]})
        if np.isfinite(ll) and (best is None or ll > best[1]):
            best = (alpha, ll, snorm)
    if best is None:
        raise ConvergenceError("all starts failed", {"restarts": restarts, "optima": optima})
    alpha, ll, snorm = best
    converged = snorm < SCORE_TOL
    if not converged:
        warnings.warn(f"g-model MLE score norm {snorm:.3g} above {SCORE_TOL}",
                      ConvergenceWarning, stacklevel=2)
    g = prior_from_alpha(spec, alpha)
    return GModelFit(spec, alpha, g, spec.P @ g, int(y.sum()), float(ll), snorm, converged,
                     restarts, optima)


def fit_alpha_to_prior(spec, g_target, max_iter=200):
    """``alpha`` minimizing ``KL(g_target || g(alpha))`` (a convex problem).

    Used to place a given prior inside (or as close as possible to) the family.
    """
    g_target = np.asarray(g_target, dtype=float)
    if g_target.shape != (spec.theta.size,):
        raise ConfigError("target prior does not match the theta grid")
    target_moments = g_target @ spec.Q
    alpha = np.zeros(spec.q)
    for _ in range(max_iter):
        g = prior_from_alpha(spec, alpha)
        grad = target_moments - g @ spec.Q
        if np.abs(grad).max() < 1e-13:
            break
        cov = spec.Q.T @ q_alpha(spec, g)
        step = np.linalg.lstsq(cov, grad, rcond=1e-12)[0]
        kl = -g_target @ np.log(np.maximum(g, 1e-300))
        t = 1.0
        while t > 1e-10:
            cand = alpha + t * step
            if -g_target @ np.log(np.maximum(prior_from_alpha(spec, cand), 1e-300)) <= kl + 1e-15:
                break
            t *= 0.5
        alpha = cand
    return alpha


def _alpha_and_N(fit, N):
    if isinstance(fit, GModelFit):
        return fit.alpha, fit.N if N is None else N
    return np.asarray(fit, dtype=float), 1 if N is None else N


def theorem4_accuracy(spec, fit, t, i, N=None, cov=None):
    """g-modeling estimate of ``E{t|x_i}`` with ``sd = |E| sqrt(w' cov(g) w)``.

    Parameters
    ----------
    spec : GModelSpec
    fit : GModelFit or array_like
        Fitted model, or a bare ``alpha`` (then ``N`` defaults to 1).
    t : array_like
        Parameter values on the theta grid.
    i : int
        x index.
    N : float, optional
        Sample size; defaults to the fit's.
    cov : ndarray, optional
        Precomputed ``cov(g)`` for this ``alpha`` and ``N``.
    """
    alpha, N = _alpha_and_N(fit, N)
    g = prior_from_alpha(spec, alpha)
    if cov is None:
        cov = g_covariance(spec, alpha, N)
    t = np.asarray(t, dtype=float)
    v = spec.P[i]
    u = t * v
    u_g = float(u @ g)
    v_g = float(v @ g)
    if v_g <= 0:
        raise NumericalError(f"x[{i}] has zero fitted marginal")
    if u_g == 0:
        raise NumericalError("u_g vanishes")
    E = u_g / v_g
    w = u / u_g - v / v_g
    cv = math.sqrt(max(float(w @ cov @ w), 0.0))
    return EstimateWithAccuracy(E, abs(E) * cv, cv, N)


def gmodel_posterior(spec, fit, t, N=None, indices=None):
    """:func:`theorem4_accuracy` over many x indices sharing one covariance.

    Entries are ``None`` where ``u_g`` vanishes (the estimate is then exactly 0
    with no delta-method sd).
    """
    alpha, N = _alpha_and_N(fit, N)
    cov = g_covariance(spec, alpha, N)
    out = []
    for i in range(spec.P.shape[0]) if indices is None else indices:
        try:
            out.append(theorem4_accuracy(spec, alpha, t, i, N, cov))
        except NumericalError:
            out.append(None)
    return out
