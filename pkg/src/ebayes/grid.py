"""
Discrete Bayes model on finite grids.

The prior ``g`` lives on a theta grid of length ``m``, observations on an x grid
of length ``n``, and the ``n x m`` sampling matrix ``P`` with
``P[i, j] = Pr{x_i | theta_j}`` maps priors to marginals, ``f = P @ g``.
Posterior quantities at a given ``x_i`` are exact ratios of linear functionals
of ``g``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, DataError

PROB_TOL = 1e-12
COLUMN_TOL = 1e-10


def make_grid(start, stop, step):
    """Equally spaced grid from `start` to `stop` inclusive.

    Values are rounded to 10 decimals so that e.g. ``make_grid(-3, 3, 0.2)``
    contains an exact 0.
    """
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ConfigError(f"grid stop {stop} is below start {start}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)


def check_grid(values, name="grid", min_length=1):
    """Validate a strictly increasing finite grid and return it as a float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional")
    if arr.size < min_length:
        raise ConfigError(f"{name} needs at least {min_length} points, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} has non-finite entries")
    if arr.size > 1 and np.any(np.diff(arr) <= 0):
        raise ConfigError(f"{name} must be strictly increasing")
    return arr


def grid_step(values):
    """Common spacing of an equally spaced grid; raises if spacing varies."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ConfigError("an equally spaced grid needs at least two points")
    steps = np.diff(values)
    if np.ptp(steps) > 1e-8 * max(1.0, abs(steps[0])):
        raise ConfigError("grid is not equally spaced")
    return float(steps.mean())


def as_probability(vec, name="probability vector", tol=PROB_TOL):
    """Clamp tiny negatives, check the total, and renormalize.

    Entries below ``-1e-15`` are an error; the sum must be within `tol` of 1
    before the final renormalization.
    """
    arr = np.asarray(vec, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DataError(f"{name} must be a non-empty vector")
    if np.any(arr < -1e-15) or not np.all(np.isfinite(arr)):
        raise DataError(f"{name} has negative or non-finite entries")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise DataError(f"{name} sums to {total!r}, not 1")
    return arr / total


def normalize_probability(weights):
    """Scale nonnegative weights to sum to one."""
    arr = np.asarray(weights, dtype=float)
    if np.any(arr < 0) or arr.sum() <= 0:
        raise DataError("weights must be nonnegative with a positive sum")
    return arr / arr.sum()


def normal_sampling_matrix(theta, x, sigma=1.0, scaling="columns"):
    """Gaussian translation kernel ``phi((x_i - theta_j) / sigma)`` on the grids.

    Parameters
    ----------
    theta, x : array_like
        Increasing grids of lengths ``m`` and ``n``.
    sigma : float
        Sampling standard deviation.
    scaling : {"columns", "bin-width"}
        ``"columns"`` renormalizes each column to sum to one, making every
        column a proper distribution on the truncated x grid.  ``"bin-width"``
        multiplies the density by the x spacing without renormalizing, so edge
        columns lose the mass that falls off the grid.

    Returns
    -------
    P : ndarray, shape (n, m)
    """
    theta = check_grid(theta, "theta grid")
    x = check_grid(x, "x grid")
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    dens = norm.pdf((x[:, None] - theta[None, :]) / sigma) / sigma
    if scaling == "columns":
        sums = dens.sum(axis=0)
        if np.any(sums <= 0):
            raise DataError("a theta column has no support on the x grid")
        return dens / sums
    if scaling == "bin-width":
        return dens * grid_step(x)
    raise ConfigError(f"unknown kernel scaling {scaling!r}")


def check_sampling_matrix(P, require_stochastic=True):
    """Validate a sampling matrix; optionally insist on unit column sums."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2:
        raise ConfigError("sampling matrix must be two-dimensional")
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise ConfigError("sampling matrix entries must be finite and nonnegative")
    if require_stochastic:
        dev = np.max(np.abs(P.sum(axis=0) - 1.0))
        if dev > COLUMN_TOL:
            raise ConfigError(f"sampling matrix columns deviate from 1 by {dev:.3g}")
    return P


@dataclass(frozen=True)
class DiscreteModel:
    """Grids plus sampling matrix: the shared substrate of all computations."""

    theta: np.ndarray
    x: np.ndarray
    P: np.ndarray
    sigma: float = 1.0
    scaling: str = "columns"

    def __post_init__(self):
        theta = check_grid(self.theta, "theta grid")
        x = check_grid(self.x, "x grid")
        P = check_sampling_matrix(self.P, require_stochastic=self.scaling == "columns")
        if P.shape != (x.size, theta.size):
            raise ConfigError(f"P has shape {P.shape}, expected {(x.size, theta.size)}")
        for name, val in (("theta", theta), ("x", x), ("P", P)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def normal(cls, theta, x, sigma=1.0, scaling="columns"):
        """Model with the Gaussian kernel of :func:`normal_sampling_matrix`."""
        P = normal_sampling_matrix(theta, x, sigma, scaling)
        return cls(np.asarray(theta, float), np.asarray(x, float), P, sigma, scaling)

    @property
    def m(self):
        return self.theta.size

    @property
    def n(self):
        return self.x.size

    def x_index(self, value):
        """Index of the x grid point nearest to `value`."""
        return int(np.argmin(np.abs(self.x - value)))

    def theta_index(self, value, tol=1e-9):
        """Index of the theta grid point equal to `value` (within `tol`)."""
        j = int(np.argmin(np.abs(self.theta - value)))
        if abs(self.theta[j] - value) > tol:
            raise ConfigError(f"{value} is not a theta grid point")
        return j

    def marginal(self, g):
        return marginal(self.P, g)


def marginal(P, g):
    """Marginal ``f = P g`` induced by prior `g`."""
    P = np.asarray(P, dtype=float)
    g = np.asarray(g, dtype=float)
    if P.ndim != 2 or g.shape != (P.shape[1],):
        raise ConfigError(f"cannot apply P of shape {P.shape} to g of shape {g.shape}")
    return P @ g


def _row_and_mass(P, g, i):
    P = np.asarray(P, dtype=float)
    g = np.asarray(g, dtype=float)
    if not 0 <= i < P.shape[0]:
        raise ConfigError(f"x index {i} out of range")
    if g.shape != (P.shape[1],):
        raise ConfigError("prior length does not match the theta grid")
    row = P[i]
    fi = row @ g
    if not fi > 0:
        raise DataError(f"observation x[{i}] has zero marginal probability")
    return row, fi


def posterior_distribution(P, g, i):
    """Posterior probabilities of theta given ``x = x_i``: ``diag(p_i) g / p_i g``."""
    row, fi = _row_and_mass(P, g, i)
    return row * np.asarray(g, dtype=float) / fi


def posterior_expectation(P, g, t, i):
    """Posterior expectation of the parameter vector `t` given ``x = x_i``."""
    row, fi = _row_and_mass(P, g, i)
    t = np.asarray(t, dtype=float)
    if t.shape != row.shape:
        raise ConfigError("parameter vector length does not match the theta grid")
    return float(t @ (row * g) / fi)


def make_uv(P, t, i):
    """Vectors ``u = t * p_i`` and ``v = p_i`` so that ``E{t|x_i} = u'g / v'g``."""
    P = np.asarray(P, dtype=float)
    t = np.asarray(t, dtype=float)
    if not 0 <= i < P.shape[0]:
        raise ConfigError(f"x index {i} out of range")
    if t.shape != (P.shape[1],):
        raise ConfigError("parameter vector length does not match the theta grid")
    v = P[i].copy()
    return t * v, v
