"""
Scenario builders and regeneration of the reference tables and simulations.

All randomness flows from a single integer seed through named streams, so a
report is a deterministic function of its settings.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import classic
from .errors import ConfigError, ConvergenceError, DataError, NumericalError
from .fmodel import (
    pseudo_inverse,
    projection_prior,
    theorem1_accuracy,
    theorem2_accuracy,
    theorem3_accuracy,
    uvw_vectors,
)
from .gmodel import (
    GModelSpec,
    fit_alpha_to_prior,
    fit_mle,
    gmodel_posterior,
    prior_from_alpha,
)
from .grid import DiscreteModel, make_grid, make_uv, normalize_probability, posterior_expectation
from .poisson import bin_observations, fit_poisson_glm
from .splines import augment_with_spike, natural_spline_basis

THETA_GRID = (-3.0, 3.0, 0.2)
X_GRID = (-4.4, 5.2, 0.05)
# bin-width scaling reproduces the printed g-model table digit for digit
DEFAULT_SCALING = "bin-width"
STREAMS = {"sampling": 1, "bootstrap": 2, "restarts": 3, "synthetic": 4}
TABLE_X = tuple(range(-4, 5))
TABLE2_RANKS = (3, 6, 9, 12, 15, 18, 21)


def stream(seed, name, *extra):
    """Independent generator for the named stream of `seed`."""
    if name not in STREAMS:
        raise ConfigError(f"unknown random stream {name!r}")
    return np.random.default_rng([int(seed), STREAMS[name], *map(int, extra)])


def canonical_parameters(theta):
    """The three parameters ``theta``, ``theta^2`` and ``1{theta <= 0}``."""
    theta = np.asarray(theta, dtype=float)
    return {
        "theta": theta.copy(),
        "theta^2": theta**2,
        "theta<=0": (theta <= 0).astype(float),
    }


@dataclass(frozen=True)
class Scenario:
    """A discrete model with a known prior and the canonical parameters."""

    name: str
    model: DiscreteModel
    prior: np.ndarray
    parameters: dict = field(repr=False)

    def __post_init__(self):
        if self.prior.shape != (self.model.m,):
            raise ConfigError("prior length does not match the theta grid")

    @property
    def marginal(self):
        return self.model.P @ self.prior

    def settings(self):
        return {
            "name": self.name,
            "theta": dict(zip(("from", "to", "step"), _grid_triplet(self.model.theta))),
            "x": dict(zip(("from", "to", "step"), _grid_triplet(self.model.x))),
            "sigma": self.model.sigma,
            "scaling": self.model.scaling,
        }


def _grid_triplet(values):
    return float(values[0]), float(values[-1]), float(np.round(values[1] - values[0], 10))


def fig1_prior(theta):
    """Equal mixture of a discretized N(0, 0.5^2) and a density proportional to ``|theta|``.

    Each component is evaluated at the grid points and normalized to sum to one
    before averaging.
    """
    theta = np.asarray(theta, dtype=float)
    return 0.5 * normalize_probability(norm.pdf(theta, 0.0, 0.5)) + 0.5 * normalize_probability(
        np.abs(theta))


def spike_slab_prior(theta, atom=0.9, at=0.0):
    """``atom`` at `at` plus ``1 - atom`` spread uniformly over all grid points."""
    theta = np.asarray(theta, dtype=float)
    g = np.full(theta.size, (1.0 - atom) / theta.size)
    j = int(np.argmin(np.abs(theta - at)))
    if abs(theta[j] - at) > 1e-9:
        raise ConfigError(f"{at} is not on the theta grid")
    g[j] += atom
    return g


def _standard_model(scaling=DEFAULT_SCALING, sigma=1.0):
    return DiscreteModel.normal(make_grid(*THETA_GRID), make_grid(*X_GRID), sigma, scaling)


def scenario_fig1(scaling=DEFAULT_SCALING):
    """Smooth bimodal prior on ``seq(-3, 3, 0.2)`` with N(theta, 1) sampling on ``seq(-4.4, 5.2, 0.05)``."""
    model = _standard_model(scaling)
    return Scenario("fig1", model, fig1_prior(model.theta), canonical_parameters(model.theta))


def scenario_fig4(scaling=DEFAULT_SCALING):
    """Spike-and-slab prior ``0.9 delta(0) + 0.1 uniform`` on the same grids."""
    model = _standard_model(scaling)
    return Scenario("fig4", model, spike_slab_prior(model.theta), canonical_parameters(model.theta))


@dataclass
class TableReport:
    """Labeled numeric table plus provenance metadata."""

    table_id: str
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        k = self.columns.index(name)
        return [row[k] for row in self.rows]

    def row(self, label):
        for row in self.rows:
            if row[0] == label:
                return dict(zip(self.columns, row))
        raise KeyError(label)


def reproduce_table1(scenario=None, rank=12, df=5, x0=2.5):
    """Unit-N sd and cv of the three posterior expectations at ``x = x0``.

    Columns: f-modeling (nonparametric, truncated inverse of rank `rank`),
    direct Bayes, and Poisson-regression f-modeling with ``ns(x, df) + 1``.
    """
    sc = scenario or scenario_fig1()
    P, g = sc.model.P, sc.prior
    f = P @ g
    i = sc.model.x_index(x0)
    pinv = pseudo_inverse(P, rank)
    X = natural_spline_basis(sc.model.x, df, intercept=True).X
    rows = []
    for label, t in sc.parameters.items():
        u, v = make_uv(P, t, i)
        uvw = uvw_vectors(pinv, u, v, f)
        th1 = theorem1_accuracy(uvw, f)
        th2 = theorem2_accuracy(u, v, g)
        th3 = theorem3_accuracy(uvw, X, f)
        E = posterior_expectation(P, g, t, i)
        rows.append([label, E, th1.sd, th2.sd, th3.sd, th1.cv, th2.cv, th3.cv])
    return TableReport(
        "table1",
        ["parameter", "E", "sdf", "sdd", "sdx", "cvf", "cvd", "cvx"],
        rows,
        {"scenario": sc.settings(), "x": x0, "rank": rank, "df": df, "N": 1},
    )


def reproduce_table2(scenario=None, ranks=TABLE2_RANKS, df=5, x0=2.5):
    """Bias/variance sweep over the truncation rank for parameters theta and 1{theta<=0}."""
    sc = scenario or scenario_fig1()
    P, g = sc.model.P, sc.prior
    f = P @ g
    i = sc.model.x_index(x0)
    X = natural_spline_basis(sc.model.x, df, intercept=True).X
    rows = []
    for r in ranks:
        pinv = pseudo_inverse(P, r)
        row = [int(r), projection_prior(pinv, P, g)[1]]
        for label in ("theta", "theta<=0"):
            u, v = make_uv(P, sc.parameters[label], i)
            uvw = uvw_vectors(pinv, u, v, f)
            acc = theorem3_accuracy(uvw, X, f)
            row += [acc.estimate, acc.cv, acc.sd]
        rows.append(row)
    return TableReport(
        "table2",
        ["r", "g_error", "E_r_theta", "cvx_theta", "sdx_theta", "E_r_ind", "cvx_ind", "sdx_ind"],
        rows,
        {"scenario": sc.settings(), "x": x0, "df": df, "N": 1},
    )


def table3_spec(scenario=None, df=5):
    """g-model for the spike-and-slab scenario: ``Q = ns(theta, df)`` plus a spike column at 0."""
    sc = scenario or scenario_fig4()
    Q = augment_with_spike(natural_spline_basis(sc.model.theta, df), sc.model.theta, 0.0)
    return GModelSpec(sc.model.theta, sc.model.P, Q.X, spike_at=0.0)


def reproduce_table3(scenario=None, df=5, xs=TABLE_X):
    """``Pr{theta = 0 | x}`` with unit-N ``theorem4_accuracy`` sd and cv at the family member closest to the truth."""
    sc = scenario or scenario_fig4()
    spec = table3_spec(sc, df)
    alpha = fit_alpha_to_prior(spec, sc.prior)
    t = np.zeros(sc.model.m)
    t[spec.spike_index] = 1.0
    idx = [sc.model.x_index(x) for x in xs]
    res = gmodel_posterior(spec, alpha, t, N=1, indices=idx)
    rows = [[float(x), r.estimate, r.sd, r.cv] for x, r in zip(xs, res)]
    gap = float(np.abs(prior_from_alpha(spec, alpha) - sc.prior).sum())
    return TableReport(
        "table3",
        ["x", "E", "sd", "cv"],
        rows,
        {"scenario": sc.settings(), "df": df, "N": 1, "alpha": [float(a) for a in alpha],
         "family_l1_gap": gap},
    )


def simulate_observations(scenario, N, seed=0, stream_name="sampling"):
    """Draw ``theta`` from the scenario prior and ``x = theta + sigma z``; continuous values."""
    rng = stream(seed, stream_name)
    theta = rng.choice(scenario.model.theta, size=int(N), p=scenario.prior / scenario.prior.sum())
    return theta + scenario.model.sigma * rng.standard_normal(int(N))


def figure6_recovery(seed=0, N=5000, df=5, restarts=5, scenario=None):
    """Fit the spike-augmented g-model to ``N`` draws from the spike-and-slab marginal.

    Returns a dict with the fitted atom at 0, the nonnull mass split, and the
    fitted prior.
    """
    sc = scenario or scenario_fig4()
    raw = simulate_observations(sc, N, seed)
    counts = bin_observations(raw, sc.model.x)
    spec = table3_spec(sc, df)
    fit = fit_mle(spec, counts, restarts=restarts, seed=int(stream(seed, "restarts").integers(2**31)))
    j0 = spec.spike_index
    nonnull = fit.g.copy()
    nonnull[j0] = 0.0
    total = nonnull.sum()
    return {
        "seed": int(seed),
        "N": int(N),
        "atom": float(fit.g[j0]),
        "true_atom": float(sc.prior[j0]),
        "nonnull_below": float(nonnull[:j0].sum() / total),
        "nonnull_above": float(nonnull[j0 + 1:].sum() / total),
        "g_total": float(fit.g.sum()),
        "converged": bool(fit.converged),
        "loglik": fit.loglik,
        "g_hat": [float(v) for v in fit.g],
        "theta": [float(v) for v in spec.theta],
        "fit": fit,
    }


def synthetic_zvalues(seed=0, N=6033, pi0=0.9, nonnull_sd=2.0):
    """Stand-in for a z-value screen: ``theta = 0`` w.p. `pi0`, else N(0, nonnull_sd^2); ``z = theta + N(0, 1)``."""
    rng = stream(seed, "synthetic")
    theta = np.where(rng.random(N) < pi0, 0.0, rng.normal(0.0, nonnull_sd, N))
    return theta + rng.standard_normal(N)


@dataclass
class ZAnalysis:
    """Everything computed by :func:`analyze_zvalues`."""

    counts: object
    poisson_fit: object
    gspec: GModelSpec
    gfit: object
    ufdr: object
    fdr_g: object
    tweedie: object
    pi0_max: float
    pi0_g: float


def analyze_zvalues(z, df=5, restarts=5, seed=0, scaling=DEFAULT_SCALING, spike=0.0):
    """Bin, fit f- and g-models, and compute ufdr, g-model fdr and Tweedie curves.

    The f-model uses ``ns(x, df) + 1`` Poisson regression; the g-model uses
    ``ns(theta, df)`` with an extra indicator column at `spike` (``None`` to omit).
    """
    model = _standard_model(scaling)
    counts = bin_observations(z, model.x)
    X = natural_spline_basis(model.x, df, intercept=True).X
    pfit = fit_poisson_glm(counts, X)
    Q = natural_spline_basis(model.theta, df)
    if spike is not None:
        Q = augment_with_spike(Q, model.theta, spike)
    gspec = GModelSpec(model.theta, model.P, np.asarray(Q), spike_at=0.0 if spike is None else spike)
    gfit = fit_mle(gspec, counts, restarts=restarts, seed=seed)
    ufdr = classic.ufdr_curve(pfit, model.x, with_sd=True)
    fdr_g = classic.fdr_curve_gmodel(gfit, gspec, model.x)
    tw = classic.tweedie_curve(pfit, model.x, with_sd=True)
    pi0_max, _ = classic.pi0_from_max(ufdr)
    return ZAnalysis(counts, pfit, gspec, gfit, ufdr, fdr_g, tw, pi0_max, float(gfit.g[gspec.spike_index]))


def reproduce_table4(z=None, seed=0, df=5, restarts=5, xs=TABLE_X):
    """ufdr and sdf (f-model), sdg and fdr (g-model) at integer x.

    Without `z` the analysis runs on :func:`synthetic_zvalues`.
    """
    source = "input"
    if z is None:
        z = synthetic_zvalues(seed)
        source = "synthetic"
    z = np.asarray(z, dtype=float)
    an = analyze_zvalues(z, df=df, restarts=restarts, seed=seed)
    x = an.counts.x
    idx = [int(np.argmin(np.abs(x - v))) for v in xs]
    rows = [
        ["ufdr"] + [float(an.ufdr.values[i]) for i in idx],
        ["sdf"] + [float(an.ufdr.sd[i]) for i in idx],
        ["sdg"] + [float(an.fdr_g.sd[i]) for i in idx],
        ["fdr"] + [float(an.fdr_g.values[i]) for i in idx],
    ]
    zmax = float(z.max())
    return TableReport(
        "table4",
        ["row"] + [f"x={v:g}" for v in xs],
        rows,
        {
            "source": source,
            "N": int(z.size),
            "n_clamped": an.counts.n_clamped,
            "pi0_from_max": an.pi0_max,
            "pi0_gmodel": an.pi0_g,
            "max_z": zmax,
            "tweedie_at_max_z": float(an.tweedie.at(zmax)),
            "gmodel_converged": bool(an.gfit.converged),
            "df": df,
            "seed": int(seed),
        },
    )


ESTIMATORS = ("tweedie", "ufdr", "constant")


@dataclass(frozen=True)
class BootstrapResult:
    x: np.ndarray
    sd: np.ndarray
    replicates: np.ndarray = field(repr=False)
    failures: int = 0


def _pipeline(name, x, df):
    X = natural_spline_basis(x, df, intercept=True).X

    def tweedie(sample):
        return classic.tweedie_curve(fit_poisson_glm(bin_observations(sample, x), X), x).estimate

    def ufdr(sample):
        return classic.ufdr_curve(fit_poisson_glm(bin_observations(sample, x), X), x).values

    def constant(sample):
        return np.zeros(x.size)

    try:
        return {"tweedie": tweedie, "ufdr": ufdr, "constant": constant}[name]
    except KeyError:
        raise ConfigError(f"unknown estimator {name!r}; choose from {ESTIMATORS}") from None


def bootstrap_sd(raw, estimator="tweedie", B=200, seed=0, x=None, df=5):
    """Nonparametric bootstrap sd of a whole bin-fit-curve pipeline.

    Replication ``b`` resamples `raw` with replacement using the stream
    ``("bootstrap", b)``.  Failed replications are counted; more than 10%
    failures abort with :class:`NumericalError`.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise DataError("no observations to resample")
    if B < 2:
        raise ConfigError("need at least 2 bootstrap replications")
    x = make_grid(*X_GRID) if x is None else np.asarray(x, dtype=float)
    run = _pipeline(estimator, x, df)
    reps = []
    failures = 0
    for b in range(B):
        sample = raw[stream(seed, "bootstrap", b).integers(0, raw.size, raw.size)]
        try:
            reps.append(run(sample))
        except (ConvergenceError, NumericalError):
            failures += 1
            if failures > 0.1 * B:
                raise NumericalError(f"{failures} of {B} bootstrap replications failed") from None
    reps = np.array(reps)
    return BootstrapResult(x, reps.std(axis=0, ddof=1), reps, failures)
