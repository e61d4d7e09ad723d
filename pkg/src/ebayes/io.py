"""
File formats: z-value input, CSV tables, JSON fit results and run manifests.

All writers are deterministic: floats are printed with ``repr`` (shortest
round-trip form), keys are sorted, and manifests carry content hashes but no
timestamps, so rerunning a command reproduces its files byte for byte.
"""

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .grid import make_grid

UNICODE_MINUS = "−"


def parse_number(text):
    """Parse a float, accepting the Unicode minus sign."""
    return float(text.strip().replace(UNICODE_MINUS, "-"))


def read_zvalues(path):
    """Read one number per line, or a single-column CSV with an optional header.

    A first line that is not numeric is taken as a header.  Blank lines,
    NaNs, infinities and unparseable lines raise :class:`DataError` naming
    the (1-based) line.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8-sig").splitlines()
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not a text file ({exc.reason})") from None
    values = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if "," in text:
            cells = [c.strip() for c in text.split(",")]
            if len(cells) != 1 and any(cells[1:]):
                raise DataError(f"{path}:{lineno}: expected a single column, got {len(cells)}")
            text = cells[0]
        if not text:
            raise DataError(f"{path}:{lineno}: blank line")
        try:
            value = parse_number(text)
        except ValueError:
            if lineno == 1:
                continue
            raise DataError(f"{path}:{lineno}: cannot parse {line.strip()!r} as a number") from None
        if not math.isfinite(value):
            raise DataError(f"{path}:{lineno}: non-finite value {line.strip()!r}")
        values.append(value)
    if not values:
        raise DataError(f"{path}: no numeric values")
    return np.array(values)


def read_integer_observations(path):
    """Like :func:`read_zvalues` but requiring nonnegative integers (Poisson counts)."""
    values = read_zvalues(path)
    if np.any(values < 0) or np.any(values != np.round(values)):
        raise DataError(f"{path}: observations must be nonnegative integers")
    return values.astype(np.int64)


def format_cell(value):
    """Deterministic text for one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0:
            return "0.0"
        return repr(value)
    return str(value)


def csv_text(header, rows):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def write_csv(path, header, rows):
    """Write a headed CSV and return its path."""
    return write_text(path, csv_text(header, rows))


def read_csv(path):
    """Read a headed CSV of numbers into ``(header, 2-d array)``."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    if len(rows) < 2:
        raise DataError(f"{path}: needs a header and at least one row")
    header = [h.strip() for h in rows[0]]
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns")
        try:
            data.append([parse_number(c) for c in row])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric cell") from None
    return header, np.array(data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    """Write JSON with sorted keys; NaN and infinities become ``null``."""
    return write_text(path, json_text(obj))


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command, settings, seed, outputs, inputs=()):
    """Provenance record for a run.

    Parameters
    ----------
    path : path-like
    command : str
    settings : dict
        Everything that determines the result (scenario, model choices).
    seed : int or None
    outputs : iterable of path-like
        Files produced; each is listed with its sha256.
    inputs : iterable of path-like
        Input files; hashed so the run can be tied to its data.
    """
    from . import __version__

    manifest = {
        "command": command,
        "package_version": __version__,
        "seed": seed,
        "settings": settings,
        "inputs": {Path(p).name: sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    return write_json(path, manifest)


def write_table_report(out_dir, report, command, seed=None, inputs=()):
    """Write ``<table_id>.csv`` and ``<table_id>.manifest.json``; return both paths."""
    out_dir = Path(out_dir)
    csv_path = write_csv(out_dir / f"{report.table_id}.csv", report.columns, report.rows)
    man = write_manifest(out_dir / f"{report.table_id}.manifest.json", command,
                         report.metadata, seed, [csv_path], inputs)
    return csv_path, man


def write_counts(path, counts):
    """Two-column CSV ``x,count`` for a :class:`~ebayes.poisson.CountVector`."""
    return write_csv(path, ["x", "count"], zip(counts.x, counts.y))


def read_counts(path):
    from .poisson import CountVector

    _, data = read_csv(path)
    if data.shape[1] != 2:
        raise DataError(f"{path}: expected columns x,count")
    return CountVector(data[:, 0], data[:, 1])


def write_prior(path, theta, g):
    """Two-column CSV ``theta,g``."""
    return write_csv(path, ["theta", "g"], zip(theta, g))


def read_prior(path):
    """Read ``theta,g``; returns ``(theta, g)`` with ``g`` normalized."""
    from .grid import normalize_probability

    _, data = read_csv(path)
    if data.shape[1] != 2:
        raise DataError(f"{path}: expected columns theta,g")
    return data[:, 0], normalize_probability(data[:, 1])


def write_grid(path, values):
    """One value per line, no header."""
    return write_text(path, "".join(format_cell(float(v)) + "\n" for v in values))


def read_grid(path):
    return read_zvalues(path)


def write_basis(path, points, basis):
    """Basis matrix as CSV with a leading ``point`` column, for cross-checking."""
    X = np.asarray(basis, dtype=float)
    header = ["point"] + [f"b{k}" for k in range(X.shape[1])]
    return write_csv(path, header, ([p] + list(row) for p, row in zip(points, X)))


def grid_spec(values):
    """``{"from", "to", "step"}`` description of an equally spaced grid."""
    values = np.asarray(values, dtype=float)
    return {"from": float(values[0]), "to": float(values[-1]),
            "step": float(np.round(values[1] - values[0], 10))}


def grid_from_spec(spec, name):
    try:
        return make_grid(float(spec["from"]), float(spec["to"]), float(spec["step"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected {{from, to, step}} ({exc})") from None


def load_scenario(path):
    """Build a :class:`~ebayes.experiments.Scenario` from JSON.

    Format::

        {"name": "custom",
         "theta": {"from": -3, "to": 3, "step": 0.2},
         "x": {"from": -4.4, "to": 5.2, "step": 0.05},
         "sigma": 1.0,
         "scaling": "bin-width",
         "prior": {"kind": "fig1-mixture" | "spike-slab" | "file",
                   "atom": 0.9, "at": 0.0, "path": "prior.csv"}}
    """
    from .experiments import (DEFAULT_SCALING, Scenario, canonical_parameters, fig1_prior,
                              spike_slab_prior)
    from .grid import DiscreteModel

    path = Path(path)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    theta = grid_from_spec(cfg.get("theta", {}), "theta")
    x = grid_from_spec(cfg.get("x", {}), "x")
    model = DiscreteModel.normal(theta, x, float(cfg.get("sigma", 1.0)),
                                 cfg.get("scaling", DEFAULT_SCALING))
    prior_cfg = cfg.get("prior", {})
    kind = prior_cfg.get("kind")
    if kind == "fig1-mixture":
        prior = fig1_prior(theta)
    elif kind == "spike-slab":
        prior = spike_slab_prior(theta, float(prior_cfg.get("atom", 0.9)),
                                 float(prior_cfg.get("at", 0.0)))
    elif kind == "file":
        prior_path = path.parent / prior_cfg.get("path", "")
        prior_theta, prior = read_prior(prior_path)
        if prior_theta.shape != theta.shape or not np.allclose(prior_theta, theta, atol=1e-9):
            raise ConfigError(f"{prior_path}: theta column does not match the grid")
    else:
        raise ConfigError(f"{path}: prior.kind must be fig1-mixture, spike-slab or file")
    return Scenario(cfg.get("name", path.stem), model, prior, canonical_parameters(theta))


def scenario_json(scenario):
    """JSON-ready description of a built-in scenario (prior written out in full)."""
    return {
        "name": scenario.name,
        "theta": grid_spec(scenario.model.theta),
        "x": grid_spec(scenario.model.x),
        "sigma": float(scenario.model.sigma),
        "scaling": scenario.model.scaling,
        "prior": [float(v) for v in scenario.prior],
    }
