"""
Natural cubic spline design matrices.

The basis mirrors R's ``splines::ns``: boundary knots at the extremes of the
data, ``df - 1`` interior knots at equally spaced quantiles, cubic B-splines
constrained to have zero second derivative at both boundary knots, and linear
extrapolation outside them.  Only the column space matters downstream.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError

DEGREE = 3


class NaturalSpline:
    """Natural cubic spline basis with fixed knots.

    Parameters
    ----------
    interior_knots : array_like
        Strictly inside the boundary knots.
    boundary_knots : tuple of float
        ``(lower, upper)``.
    """

    def __init__(self, interior_knots, boundary_knots):
        lo, hi = map(float, boundary_knots)
        if not hi > lo:
            raise ConfigError("boundary knots must satisfy lower < upper")
        self.interior_knots = np.asarray(interior_knots, dtype=float)
        self.boundary_knots = (lo, hi)
        self._knots = np.r_[[lo] * (DEGREE + 1), self.interior_knots, [hi] * (DEGREE + 1)]
        nb = self._knots.size - DEGREE - 1
        self._bspline = BSpline(self._knots, np.eye(nb), DEGREE)
        # drop the first B-spline (no intercept), then project out the
        # second-derivative constraints at both boundaries
        d2 = self._bspline.derivative(2)
        const = np.vstack([_eval_inside(d2, lo, lo, hi), _eval_inside(d2, hi, lo, hi)])[:, 1:]
        qmat, _ = np.linalg.qr(const.T, mode="complete")
        self._proj = qmat[:, 2:]

    @property
    def df(self):
        return self._proj.shape[1]

    def evaluate(self, points, deriv=0):
        """Basis (or its `deriv`-th derivative) at `points`, shape ``(len(points), df)``."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        lo, hi = self.boundary_knots
        out = np.empty((pts.size, self.df))
        inside = (pts >= lo) & (pts <= hi)
        if inside.any():
            spl = self._bspline.derivative(deriv) if deriv else self._bspline
            out[inside] = _eval_inside(spl, pts[inside], lo, hi)[:, 1:] @ self._proj
        for edge, mask in ((lo, pts < lo), (hi, pts > hi)):
            if not mask.any():
                continue
            val = _eval_inside(self._bspline, edge, lo, hi)[:, 1:] @ self._proj
            slope = _eval_inside(self._bspline.derivative(1), edge, lo, hi)[:, 1:] @ self._proj
            if deriv == 0:
                out[mask] = val + np.outer(pts[mask] - edge, slope)
            elif deriv == 1:
                out[mask] = slope
            else:
                out[mask] = 0.0
        return out


def _eval_inside(spl, pts, lo, hi):
    return spl(np.clip(np.atleast_1d(np.asarray(pts, dtype=float)), lo, hi))


@dataclass(frozen=True)
class BasisMatrix:
    """Design matrix together with the spline that generated it.

    Attributes
    ----------
    X : ndarray, shape (n, p)
    spline : NaturalSpline or None
        ``None`` for matrices not built from a spline (identity, polynomial).
    intercept : bool
        First column is all ones.
    extra_columns : tuple of str
        Labels of appended indicator columns.
    """

    X: np.ndarray
    spline: NaturalSpline = None
    intercept: bool = False
    extra_columns: tuple = ()

    @property
    def shape(self):
        return self.X.shape

    def __array__(self, dtype=None, copy=None):
        return self.X if dtype is None else self.X.astype(dtype)


def check_full_rank(X, rtol=1e-8):
    """Raise unless the smallest singular value exceeds ``rtol`` times the largest."""
    s = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    if s.size == 0 or s[-1] <= rtol * s[0]:
        raise ConfigError("design matrix is not of full column rank")


def natural_spline_basis(points, df, intercept=False):
    """Natural cubic spline design matrix evaluated at `points`.

    Parameters
    ----------
    points : array_like
        Strictly increasing evaluation points (the grid).
    df : int
        Number of spline columns.
    intercept : bool
        Prepend a column of ones, giving ``df + 1`` columns.

    Returns
    -------
    BasisMatrix
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1 or np.any(np.diff(pts) <= 0):
        raise ConfigError("spline points must be strictly increasing")
    df = int(df)
    if df < 1:
        raise ConfigError("df must be at least 1")
    if pts.size < df + 2:
        raise ConfigError(f"df={df} is too large for {pts.size} points")
    probs = np.linspace(0.0, 1.0, df + 1)[1:-1]
    spline = NaturalSpline(np.quantile(pts, probs), (pts[0], pts[-1]))
    X = spline.evaluate(pts)
    if intercept:
        X = np.column_stack([np.ones(pts.size), X])
    check_full_rank(X)
    return BasisMatrix(X, spline, intercept)


def augment_with_spike(Q, theta, spike_at=0.0, tol=1e-9):
    """Append an indicator column with a single 1 at the grid point `spike_at`."""
    theta = np.asarray(theta, dtype=float)
    X = np.asarray(Q, dtype=float)
    if X.shape[0] != theta.size:
        raise ConfigError("basis rows do not match the theta grid")
    j = int(np.argmin(np.abs(theta - spike_at)))
    if abs(theta[j] - spike_at) > tol:
        raise ConfigError(f"spike location {spike_at} is not a grid point")
    col = np.zeros(theta.size)
    col[j] = 1.0
    out = np.column_stack([X, col])
    check_full_rank(out)
    if isinstance(Q, BasisMatrix):
        return BasisMatrix(out, Q.spline, Q.intercept, Q.extra_columns + (f"spike@{spike_at:g}",))
    return BasisMatrix(out, None, False, (f"spike@{spike_at:g}",))
