"""
Bayes rule in terms of the marginal ``f``.

With a pseudo-inverse ``A`` of ``P`` (so ``g = A f``), the posterior expectation
``u'g / v'g`` becomes ``U'f / V'f`` with ``U = A'u`` and ``V = A'v``.  Plugging
in an estimate of ``f`` gives the f-modeling estimate; its delta-method
accuracy follows from the covariance of ``fhat``.  Truncating the SVD of ``P``
regularizes the inversion at the price of replacing ``g`` by its projection
onto the leading right singular vectors.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

DEFAULT_ENERGY_EPS = 1e-10


@dataclass(frozen=True)
class PseudoInverse:
    """An ``m x n`` left inverse (possibly regularized) of the sampling matrix.

    Attributes
    ----------
    A : ndarray, shape (m, n)
    rank : int
        Number of singular components kept.
    singular_values : ndarray
        All singular values of ``P``, descending.
    flavor : str
        ``"full"``, ``"truncated"`` or ``"generalized"``.
    R : ndarray or None
        Right singular vectors (columns), when the SVD was used.
    """

    A: np.ndarray
    rank: int
    singular_values: np.ndarray
    flavor: str
    R: np.ndarray = None

    @property
    def projector(self):
        """``R_r R_r'``, the map from ``g`` to its rank-``r`` approximation."""
        if self.R is None:
            return np.eye(self.A.shape[0])
        Rr = self.R[:, : self.rank]
        return Rr @ Rr.T


def energy_rank(d, eps=DEFAULT_ENERGY_EPS):
    """Smallest ``r`` with ``sum(d[r:]**2) / sum(d**2) < eps``."""
    d = np.asarray(d, dtype=float)
    energy = d**2
    total = energy.sum()
    if total <= 0:
        raise NumericalError("all singular values are zero")
    tail = np.cumsum(energy[::-1])[::-1] / total  # tail[k] = sum(d[k:]**2)/total
    for r in range(1, d.size):
        if tail[r] < eps:
            return r
    return d.size


def pseudo_inverse(P, rank=None, energy_eps=DEFAULT_ENERGY_EPS):
    """Truncated-SVD pseudo-inverse ``A_r = R_r D_r^{-1} L_r'``.

    Parameters
    ----------
    P : array_like, shape (n, m)
    rank : int, optional
        Number of components; by default chosen by :func:`energy_rank`.
        ``rank=m`` gives the full inverse ``(P'P)^{-1} P'``.
    energy_eps : float
        Threshold of the energy rule when `rank` is not given.
    """
    P = np.asarray(P, dtype=float)
    if not np.any(P):
        raise ConfigError("sampling matrix is identically zero")
    L, d, Rt = np.linalg.svd(P, full_matrices=False)
    m = d.size
    if rank is None:
        rank = energy_rank(d, energy_eps)
    rank = int(rank)
    if not 1 <= rank <= m:
        raise ConfigError(f"rank must lie in 1..{m}, got {rank}")
    if d[rank - 1] < 1e-12 * d[0]:
        raise ConfigError(f"rank {rank} exceeds the numerical rank of P")
    R = Rt.T
    A = (R[:, :rank] / d[:rank]) @ L[:, :rank].T
    flavor = "full" if rank == m else "truncated"
    return PseudoInverse(A, rank, d, flavor, R)


def generalized_pseudo_inverse(P, B):
    """Weighted left inverse ``(P'BP)^{-1} P'B`` for a symmetric positive definite `B`."""
    P = np.asarray(P, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.shape != (P.shape[0], P.shape[0]):
        raise ConfigError("B must be n x n")
    PtB = P.T @ B
    try:
        A = np.linalg.solve(PtB @ P, PtB)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("P'BP is singular") from exc
    d = np.linalg.svd(P, compute_uv=False)
    return PseudoInverse(A, P.shape[1], d, "generalized")


@dataclass(frozen=True)
class UVWVectors:
    """``U = A'u``, ``V = A'v`` and the centered influence vector ``W``.

    ``W = U / U_f - V / V_f`` where ``U_f = f'U`` and ``V_f = f'V``.
    """

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    U_f: float
    V_f: float

    @property
    def estimate(self):
        """``U_f / V_f``, the posterior expectation implied by the reference ``f``."""
        return self.U_f / self.V_f


def uvw_vectors(A, u, v, f):
    """Build :class:`UVWVectors` from a pseudo-inverse and the ``u, v`` pair."""
    A = A.A if isinstance(A, PseudoInverse) else np.asarray(A, dtype=float)
    f = np.asarray(f, dtype=float)
    U = A.T @ np.asarray(u, dtype=float)
    V = A.T @ np.asarray(v, dtype=float)
    U_f = float(f @ U)
    V_f = float(f @ V)
    scale = np.abs(f) @ (np.abs(U) + np.abs(V))
    if abs(V_f) <= 1e-14 * max(scale, 1e-300):
        raise NumericalError("V_f vanishes: the x point carries no marginal mass")
    if abs(U_f) <= 1e-14 * max(scale, 1e-300):
        raise NumericalError("U_f vanishes: the parameter is orthogonal to the marginal")
    return UVWVectors(U, V, U / U_f - V / V_f, U_f, V_f)


def estimate_E_hat(uvw, fhat):
    """Plug-in estimate ``U'fhat / V'fhat``."""
    fhat = np.asarray(fhat, dtype=float)
    den = float(uvw.V @ fhat)
    if den == 0:
        raise NumericalError("V'fhat is zero")
    return float(uvw.U @ fhat) / den


@dataclass(frozen=True)
class EstimateWithAccuracy:
    """Posterior expectation estimate with delta-method sd and cv at sample size `N`."""

    estimate: float
    sd: float
    cv: float
    N: float = 1

    def as_dict(self):
        return {"estimate": self.estimate, "sd": self.sd, "cv": self.cv, "N": self.N}


def _accuracy(estimate, cv):
    return float(estimate), abs(float(estimate)) * float(cv), float(cv)


def theorem1_accuracy(uvw, f, N=1):
    """Nonparametric delta-method accuracy of ``U'fhat / V'fhat``.

    ``cv = sigma_f(W) / sqrt(N)`` with ``sigma_f(W)^2 = sum f_i W_i^2``, and
    ``sd = |E| cv`` with ``E = U'f / V'f``.
    """
    f = np.asarray(f, dtype=float)
    cv = math.sqrt(float(f @ uvw.W**2) / N)
    E, sd, cv = _accuracy(uvw.U @ f / (uvw.V @ f), cv)
    return EstimateWithAccuracy(E, sd, cv, N)


def theorem2_accuracy(u, v, g, N=1):
    """Accuracy of the direct Bayes estimate ``u'gbar / v'gbar``.

    Uses ``w = u/u_g - v/v_g`` and ``cv = sigma_g(w) / sqrt(N)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    u_g = float(g @ u)
    v_g = float(g @ v)
    if u_g == 0 or v_g == 0:
        raise NumericalError("u_g or v_g vanishes")
    w = u / u_g - v / v_g
    cv = math.sqrt(float(g @ w**2) / N)
    E, sd, cv = _accuracy(u_g / v_g, cv)
    return EstimateWithAccuracy(E, sd, cv, N)


def theorem3_accuracy(W, X, f, N=1, estimate=None):
    """Accuracy of ``U'fhat / V'fhat`` when ``fhat`` comes from Poisson regression on `X`.

    ``cv^2 = (W'X)_f (X'X)_f^{-1} (W'X)_f' / N`` with ``(W'X)_f = W' diag(f) X``
    and ``(X'X)_f = X' diag(f) X``; this is the squared ``f``-weighted length of
    the projection of ``W`` onto the column space of ``X``, over ``N``.

    Parameters
    ----------
    W : array_like or UVWVectors
        Influence vector.  When a :class:`UVWVectors` is passed, the estimate
        defaults to ``U'f / V'f``.
    X : array_like, shape (n, p)
    f : array_like
        Marginal (true or fitted) used for the weighting.
    N : float
    estimate : float, optional
        Value used for ``sd = |E| cv``.
    """
    f = np.asarray(f, dtype=float)
    if isinstance(W, UVWVectors):
        if estimate is None:
            estimate = float(W.U @ f / (W.V @ f))
        W = W.W
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    WX = (W * f) @ X
    G = X.T @ (f[:, None] * X)
    try:
        quad = float(WX @ np.linalg.solve(G, WX))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("(X'X)_f is singular") from exc
    cv = math.sqrt(max(quad, 0.0) / N)
    E, sd, cv = _accuracy(1.0 if estimate is None else estimate, cv)
    return EstimateWithAccuracy(E, sd, cv, N)


def projection_prior(pinv, P, g):
    """Rank-``r`` image ``g_r = A_r P g`` of the prior and its L1 error.

    For a truncated SVD inverse ``g_r = R_r R_r' g``; negative entries are kept.
    """
    g = np.asarray(g, dtype=float)
    g_r = pinv.A @ (np.asarray(P, dtype=float) @ g)
    return g_r, float(np.abs(g_r - g).sum())


def sample_size_for_cv(cv1, c0):
    """Sample size ``ceil((cv1 / c0)^2)`` that brings a unit-N cv down to `c0`."""
    if not c0 > 0:
        raise ConfigError("target cv must be positive")
    # guard against 1936.0000000000002 style round-off
    return int(math.ceil((cv1 / c0) ** 2 - 1e-9))


def fmodel_posterior(P, t, fhat, X=None, rank=None, N=1, energy_eps=DEFAULT_ENERGY_EPS,
                     indices=None):
    """f-modeling estimates of ``E{t|x_i}`` with ``theorem3_accuracy`` (or ``theorem1_accuracy``) sds.

    Parameters
    ----------
    P : array_like, shape (n, m)
    t : array_like, length m
    fhat : array_like, length n
        Estimated marginal; also used as the reference ``f`` in the accuracy formula.
    X : array_like, optional
        Poisson regression structure matrix; ``None`` uses the nonparametric
        ``theorem1_accuracy`` formula.
    rank : int, optional
        SVD truncation; energy rule when omitted.
    indices : iterable of int, optional
        x indices to evaluate (default: all).

    Returns
    -------
    list of EstimateWithAccuracy (``None`` where the estimate is undefined)
    """
    P = np.asarray(P, dtype=float)
    pinv = pseudo_inverse(P, rank, energy_eps)
    fhat = np.asarray(fhat, dtype=float)
    t = np.asarray(t, dtype=float)
    out = []
    for i in range(P.shape[0]) if indices is None else indices:
        u, v = t * P[i], P[i]
        try:
            uvw = uvw_vectors(pinv, u, v, fhat)
        except NumericalError:
            out.append(None)
            continue
        if X is None:
            out.append(theorem1_accuracy(uvw, fhat, N))
        else:
            out.append(theorem3_accuracy(uvw, X, fhat, N))
    return out
