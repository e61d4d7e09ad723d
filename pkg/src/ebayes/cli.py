"""
Command-line entry point: ``ebayes <command> [options]`` or ``python -m ebayes``.

Exit status is 0 on success, 2 for configuration errors, 3 for data errors
and 4 for numerical failures; failures also print a one-line JSON object on
stderr.
"""

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import classic, experiments, io
from .errors import ConfigError, DataError, EBayesError, NumericalError
from .fmodel import DEFAULT_ENERGY_EPS, fmodel_posterior
from .gmodel import GModelSpec, fit_mle, gmodel_posterior
from .poisson import bin_observations, fit_poisson_glm
from .splines import augment_with_spike, natural_spline_basis

OUT_ENV = "EBAYES_OUT"
DEFAULT_OUT = "ebayes-out"
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4
COMMANDS = ("tables", "fit-f", "fit-g", "tweedie", "fdr", "james-stein", "robbins", "simulate")
NEEDS_INPUT = {"fit-f", "fit-g", "tweedie", "fdr", "james-stein", "robbins"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _report_error("config", message)
        raise SystemExit(EXIT_CONFIG)


def _report_error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one command."""

    command: str
    table: int = None
    input: str = None
    scenario: str = None
    df: int = 5
    rank: int = None
    energy_eps: float = DEFAULT_ENERGY_EPS
    spike: float = None
    boot: int = 0
    restarts: int = 5
    n: int = None
    seed: int = 0
    out: str = DEFAULT_OUT

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.input is not None and self.scenario is not None:
            raise ConfigError("--input and --scenario are mutually exclusive")
        if self.command in NEEDS_INPUT and self.input is None:
            raise ConfigError(f"{self.command} needs --input")
        if self.command == "tables" and self.table not in (1, 2, 3, 4):
            raise ConfigError("tables takes 1, 2, 3 or 4")
        if self.command == "tables" and self.input is not None and self.table != 4:
            raise ConfigError("--input only applies to table 4")
        if self.scenario is not None and self.scenario not in ("fig1", "fig4"):
            if not Path(self.scenario).is_file():
                raise ConfigError("--scenario must be fig1, fig4 or a scenario JSON file")
        if self.df < 1:
            raise ConfigError("--df must be at least 1")
        if self.rank is not None and self.rank < 1:
            raise ConfigError("--rank must be positive")
        if not self.energy_eps > 0:
            raise ConfigError("--energy-eps must be positive")
        if self.boot and self.boot < 2:
            raise ConfigError("--boot needs at least 2 replications")
        if self.restarts < 1:
            raise ConfigError("--restarts must be positive")
        if self.n is not None and self.n < 1:
            raise ConfigError("--n must be positive")
        if self.seed < 0:
            raise ConfigError("--seed must be nonnegative")

    def settings(self):
        d = asdict(self)
        d.pop("out")
        if d["input"] is not None:
            d["input"] = Path(d["input"]).name
        return d


def build_parser():
    p = _Parser(prog="ebayes", description="Empirical Bayes estimation by f- and g-modeling.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def common(sp, inputs=True):
        if inputs:
            sp.add_argument("--input", help="z-value file: one number per line or a one-column CSV")
        sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--df", type=int, default=5, help="natural spline degrees of freedom")

    t = sub.add_parser("tables", help="regenerate Table 1, 2, 3 or 4")
    t.add_argument("table", type=int, help="table number 1-4")
    t.add_argument("--scenario", help="fig1, fig4 or a scenario JSON file")
    t.add_argument("--rank", type=int, help="SVD truncation rank (table 1)")
    t.add_argument("--restarts", type=int, default=5, help="g-model starts (table 4)")
    common(t)

    f = sub.add_parser("fit-f", help="f-modeling posterior mean with sd band")
    f.add_argument("--rank", type=int, help="SVD truncation rank (default: energy rule)")
    f.add_argument("--energy-eps", type=float, default=DEFAULT_ENERGY_EPS)
    common(f)

    g = sub.add_parser("fit-g", help="g-modeling fit, prior estimate and posterior mean")
    g.add_argument("--spike", type=float, help="theta value receiving an indicator column")
    g.add_argument("--restarts", type=int, default=5)
    common(g)

    for name, text in (("tweedie", "Tweedie posterior mean curve"),
                       ("fdr", "local false discovery rate curves")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--boot", type=int, default=0, help="bootstrap replications (0 = none)")
        common(sp)
    sub.add_parser("james-stein", help="James-Stein shrinkage of the input values").add_argument(
        "--input", help="values file")
    r = sub.add_parser("robbins", help="Robbins' estimate from integer counts")
    r.add_argument("--input", help="file of nonnegative integers")
    for sp in (sub.choices["james-stein"], r):
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="draw observations from a scenario")
    s.add_argument("--scenario", default="fig1", help="fig1, fig4 or a scenario JSON file")
    s.add_argument("--n", type=int, default=5000, help="number of observations")
    common(s, inputs=False)
    return p


def _config(ns):
    keys = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    keys["out"] = ns.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    return RunConfig(**keys)


def _scenario(cfg, default):
    name = cfg.scenario or default
    if name == "fig1":
        return experiments.scenario_fig1()
    if name == "fig4":
        return experiments.scenario_fig4()
    return io.load_scenario(name)


def _inputs(cfg):
    return [cfg.input] if cfg.input else []


def _finish(cfg, outputs, extra=None):
    settings = cfg.settings()
    if extra:
        settings.update(extra)
    out = Path(cfg.out)
    man = io.write_manifest(out / f"{cfg.command}.manifest.json", cfg.command, settings,
                            cfg.seed, outputs, _inputs(cfg))
    for p in list(outputs) + [man]:
        print(p)


def run_tables(cfg):
    if cfg.table == 1:
        report = experiments.reproduce_table1(_scenario(cfg, "fig1"), rank=cfg.rank or 12, df=cfg.df)
    elif cfg.table == 2:
        report = experiments.reproduce_table2(_scenario(cfg, "fig1"), df=cfg.df)
    elif cfg.table == 3:
        report = experiments.reproduce_table3(_scenario(cfg, "fig4"), df=cfg.df)
    else:
        z = io.read_zvalues(cfg.input) if cfg.input else None
        report = experiments.reproduce_table4(z, seed=cfg.seed, df=cfg.df, restarts=cfg.restarts)
    report.metadata["run"] = cfg.settings()
    for p in io.write_table_report(cfg.out, report, f"tables {cfg.table}", cfg.seed, _inputs(cfg)):
        print(p)


def _model():
    return experiments._standard_model()


def run_fit_f(cfg):
    z = io.read_zvalues(cfg.input)
    model = _model()
    counts = bin_observations(z, model.x)
    X = natural_spline_basis(model.x, cfg.df, intercept=True).X
    fit = fit_poisson_glm(counts, X)
    res = fmodel_posterior(model.P, model.theta, fit.fhat, X=X, rank=cfg.rank, N=counts.N,
                           energy_eps=cfg.energy_eps)
    rows = [[x, None, None] if r is None else [x, r.estimate, r.sd] for x, r in zip(model.x, res)]
    curve = io.write_csv(Path(cfg.out) / "fit-f.curve.csv", ["x", "estimate", "sd"], rows)
    summary = fit.summary()
    summary["n_clamped"] = counts.n_clamped
    js = io.write_json(Path(cfg.out) / "fit-f.fit.json", summary)
    _finish(cfg, [curve, js])


def run_fit_g(cfg):
    z = io.read_zvalues(cfg.input)
    model = _model()
    counts = bin_observations(z, model.x)
    Q = natural_spline_basis(model.theta, cfg.df)
    if cfg.spike is not None:
        Q = augment_with_spike(Q, model.theta, cfg.spike)
    spec = GModelSpec(model.theta, model.P, np.asarray(Q), spike_at=cfg.spike)
    fit = fit_mle(spec, counts, restarts=cfg.restarts, seed=cfg.seed)
    out = Path(cfg.out)
    js = io.write_json(out / "fit-g.fit.json", fit.to_json())
    cov_sd = np.sqrt(np.clip(np.diag(fit.cov_g), 0, None))
    prior = io.write_csv(out / "fit-g.prior.csv", ["theta", "g_hat", "sd"],
                         zip(model.theta, fit.g, cov_sd))
    res = gmodel_posterior(spec, fit, model.theta)
    rows = [[x, None, None] if r is None else [x, r.estimate, r.sd] for x, r in zip(model.x, res)]
    curve = io.write_csv(out / "fit-g.curve.csv", ["x", "estimate", "sd"], rows)
    _finish(cfg, [js, prior, curve])


def _boot(cfg, z, estimator):
    if not cfg.boot:
        return None
    return experiments.bootstrap_sd(z, estimator, B=cfg.boot, seed=cfg.seed, df=cfg.df).sd


def run_tweedie(cfg):
    z = io.read_zvalues(cfg.input)
    model = _model()
    fit = fit_poisson_glm(bin_observations(z, model.x),
                          natural_spline_basis(model.x, cfg.df, intercept=True).X)
    tw = classic.tweedie_curve(fit, model.x, with_sd=True)
    boot = _boot(cfg, z, "tweedie")
    header = ["x", "estimate", "sd"] + (["boot_sd"] if boot is not None else [])
    cols = [tw.x, tw.estimate, tw.sd] + ([boot] if boot is not None else [])
    curve = io.write_csv(Path(cfg.out) / "tweedie.curve.csv", header, zip(*cols))
    _finish(cfg, [curve])


def run_fdr(cfg):
    z = io.read_zvalues(cfg.input)
    model = _model()
    fit = fit_poisson_glm(bin_observations(z, model.x),
                          natural_spline_basis(model.x, cfg.df, intercept=True).X)
    u = classic.ufdr_curve(fit, model.x, with_sd=True)
    pi0, fdr = classic.pi0_from_max(u)
    boot = _boot(cfg, z, "ufdr")
    header = ["x", "ufdr", "sd", "fdr"] + (["boot_sd"] if boot is not None else [])
    cols = [u.x, u.values, u.sd, fdr.values] + ([boot] if boot is not None else [])
    curve = io.write_csv(Path(cfg.out) / "fdr.curve.csv", header, zip(*cols))
    _finish(cfg, [curve], {"pi0_from_max": pi0})


def run_james_stein(cfg):
    values = io.read_zvalues(cfg.input)
    est = classic.james_stein(values)
    path = io.write_csv(Path(cfg.out) / "james-stein.csv", ["x", "estimate"], zip(values, est))
    _finish(cfg, [path])


def run_robbins(cfg):
    obs = io.read_integer_observations(cfg.input)
    freq = np.bincount(obs) / obs.size
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for x in range(freq.size):
            est = classic.robbins_estimate(freq, x) if freq[x] > 0 else None
            rows.append([x, int(round(freq[x] * obs.size)), est])
    path = io.write_csv(Path(cfg.out) / "robbins.csv", ["x", "count", "estimate"], rows)
    _finish(cfg, [path])


def run_simulate(cfg):
    sc = _scenario(cfg, "fig1")
    z = experiments.simulate_observations(sc, cfg.n, cfg.seed)
    path = io.write_csv(Path(cfg.out) / f"simulate.{sc.name}.csv", ["z"], ([v] for v in z))
    _finish(cfg, [path], {"scenario_settings": sc.settings()})


RUNNERS = {
    "tables": run_tables, "fit-f": run_fit_f, "fit-g": run_fit_g, "tweedie": run_tweedie,
    "fdr": run_fdr, "james-stein": run_james_stein, "robbins": run_robbins,
    "simulate": run_simulate,
}


def main(argv=None):
    """Run the command line; return the exit status."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    if ns.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _config(ns)
        RUNNERS[cfg.command](cfg)
    except ConfigError as exc:
        _report_error("config", exc)
        return EXIT_CONFIG
    except DataError as exc:
        _report_error("data", exc)
        return EXIT_DATA
    except NumericalError as exc:
        payload = {"error": "numerical", "message": str(exc)}
        diag = getattr(exc, "diagnostics", None)
        if diag:
            payload["diagnostics"] = io._jsonable(diag)
        sys.stderr.write(json.dumps(payload, default=str) + "\n")
        return EXIT_NUMERICAL
    except EBayesError as exc:
        _report_error("error", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        _report_error("data", exc)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
