import json

import numpy as np
import pytest

from ebayes import io
from ebayes.cli import main
from ebayes.errors import ConfigError, DataError
from ebayes.experiments import scenario_fig4, simulate_observations, synthetic_zvalues
from ebayes.poisson import CountVector


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# readers --------------------------------------------------------------------

def test_read_plain_values_with_unicode_minus(tmp_path):
    p = write(tmp_path, "z.txt", "1.0\n−2.5\n")
    assert io.read_zvalues(p).tolist() == [1.0, -2.5]


def test_read_skips_header_and_accepts_one_column_csv(tmp_path):
    p = write(tmp_path, "z.csv", "z\n0.5\n-1\n3e-1\n")
    assert io.read_zvalues(p).tolist() == [0.5, -1.0, 0.3]
    p = write(tmp_path, "z2.csv", "z,\n0.5,\n")
    assert io.read_zvalues(p).tolist() == [0.5]


@pytest.mark.parametrize("text,line", [
    ("1.0\n2.0\nabc\n", 3),
    ("z\n1.0\n\n2.0\n", 3),
    ("1.0\nnan\n", 2),
    ("1.0\ninf\n", 2),
    ("1,2\n", 1),
])
def test_read_rejects_bad_lines_with_line_number(tmp_path, text, line):
    p = write(tmp_path, "bad.txt", text)
    with pytest.raises(DataError, match=f":{line}:"):
        io.read_zvalues(p)


def test_read_missing_and_empty(tmp_path):
    with pytest.raises(DataError):
        io.read_zvalues(tmp_path / "missing.txt")
    with pytest.raises(DataError):
        io.read_zvalues(write(tmp_path, "h.txt", "z\n"))


def test_integer_observations(tmp_path):
    assert io.read_integer_observations(write(tmp_path, "c.txt", "0\n3\n1\n")).tolist() == [0, 3, 1]
    with pytest.raises(DataError):
        io.read_integer_observations(write(tmp_path, "d.txt", "0\n1.5\n"))


# writers --------------------------------------------------------------------

def test_csv_formatting_is_exact_and_round_trips(tmp_path):
    p = io.write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[0.1, 2, None], [1e-300, True, "x"]])
    assert p.read_bytes() == b"a,b,c\n0.1,2,\n1e-300,true,x\n"


def test_counts_prior_grid_basis_round_trip(tmp_path):
    x = np.array([0.0, 0.5, 1.0])
    io.write_counts(tmp_path / "c.csv", CountVector(x, [2, 0, 5]))
    c = io.read_counts(tmp_path / "c.csv")
    assert c.y.tolist() == [2, 0, 5] and c.x.tolist() == x.tolist()
    io.write_prior(tmp_path / "g.csv", x, [0.2, 0.3, 0.5])
    th, g = io.read_prior(tmp_path / "g.csv")
    assert g.tolist() == [0.2, 0.3, 0.5]
    io.write_grid(tmp_path / "grid.txt", x)
    assert io.read_grid(tmp_path / "grid.txt").tolist() == x.tolist()
    io.write_basis(tmp_path / "b.csv", x, np.eye(3))
    header, data = io.read_csv(tmp_path / "b.csv")
    assert header == ["point", "b0", "b1", "b2"] and data.shape == (3, 4)


def test_json_is_sorted_and_nan_safe(tmp_path):
    p = io.write_json(tmp_path / "a.json", {"b": np.float64(np.nan), "a": np.arange(2)})
    assert p.read_text() == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": null\n}\n'


def test_scenario_json_round_trip(tmp_path):
    cfg = {"name": "s", "theta": {"from": -3, "to": 3, "step": 0.2},
           "x": {"from": -4.4, "to": 5.2, "step": 0.05}, "sigma": 1.0,
           "prior": {"kind": "spike-slab", "atom": 0.9, "at": 0.0}}
    p = write(tmp_path, "s.json", json.dumps(cfg))
    sc = io.load_scenario(p)
    np.testing.assert_allclose(sc.prior, scenario_fig4().prior)
    np.testing.assert_allclose(sc.model.P, scenario_fig4().model.P)
    io.write_prior(tmp_path / "g.csv", sc.model.theta, sc.prior)
    cfg["prior"] = {"kind": "file", "path": "g.csv"}
    sc2 = io.load_scenario(write(tmp_path, "s2.json", json.dumps(cfg)))
    np.testing.assert_allclose(sc2.prior, sc.prior)
    cfg["prior"] = {"kind": "other"}
    with pytest.raises(ConfigError):
        io.load_scenario(write(tmp_path, "s3.json", json.dumps(cfg)))
    with pytest.raises(ConfigError):
        io.load_scenario(write(tmp_path, "s4.json", "{nope"))


# command line -----------------------------------------------------------------

def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_no_arguments_prints_usage(capsys):
    code, _, err = run([], capsys)
    assert code == 2 and "usage" in err


def test_bad_flags_exit_2_with_json(tmp_path, capsys):
    code, _, err = run(["tables", "7", "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(err.strip().splitlines()[-1])["error"] == "config"
    code, _, _ = run(["tweedie", "--out", str(tmp_path)], capsys)
    assert code == 2
    code, _, _ = run(["frobnicate"], capsys)
    assert code == 2


def test_data_error_exit_3(tmp_path, capsys):
    bad = write(tmp_path, "bad.txt", "1\n2\nabc\n")
    code, _, err = run(["tweedie", "--input", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 3
    payload = json.loads(err)
    assert payload["error"] == "data" and ":3:" in payload["message"]


def test_degenerate_data_exit_3(tmp_path, capsys):
    flat = write(tmp_path, "flat.txt", "\n".join(["1.0"] * 10) + "\n")
    code, _, _ = run(["james-stein", "--input", str(flat), "--out", str(tmp_path)], capsys)
    assert code == 3  # S = 0 is a property of the data


def test_numerical_error_exit_4_with_diagnostics(tmp_path, capsys, monkeypatch):
    from ebayes import cli
    from ebayes.errors import ConvergenceError

    def failing(cfg):
        raise ConvergenceError("did not converge", {"iterations": 3, "grad_norm": 0.5})

    monkeypatch.setitem(cli.RUNNERS, "simulate", failing)
    code, _, err = run(["simulate", "--out", str(tmp_path)], capsys)
    assert code == 4
    payload = json.loads(err)
    assert payload["error"] == "numerical" and payload["diagnostics"]["iterations"] == 3


def test_tables_command_writes_csv_and_manifest(tmp_path, capsys):
    code, out, _ = run(["tables", "1", "--seed", "7", "--out", str(tmp_path)], capsys)
    assert code == 0
    text = (tmp_path / "table1.csv").read_text()
    assert text.splitlines()[0] == "parameter,E,sdf,sdd,sdx,cvf,cvd,cvx"
    man = json.loads((tmp_path / "table1.manifest.json").read_text())
    assert man["seed"] == 7 and man["settings"]["rank"] == 12
    assert man["outputs"]["table1.csv"] == io.sha256_file(tmp_path / "table1.csv")


def test_output_directory_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("EBAYES_OUT", str(tmp_path / "envout"))
    assert run(["tables", "3"], capsys)[0] == 0
    assert (tmp_path / "envout" / "table3.csv").exists()


def test_fit_g_recovers_spike(tmp_path, capsys):
    z = simulate_observations(scenario_fig4(), 5000, seed=4)
    src = tmp_path / "z.csv"
    io.write_csv(src, ["z"], ([v] for v in z))
    code, _, _ = run(["fit-g", "--input", str(src), "--spike", "0", "--out", str(tmp_path)], capsys)
    assert code == 0
    fit = json.loads((tmp_path / "fit-g.fit.json").read_text())
    assert abs(fit["pi0_at_spike"] - 0.903) < 0.05
    header, prior = io.read_csv(tmp_path / "fit-g.prior.csv")
    assert header == ["theta", "g_hat", "sd"] and abs(prior[:, 1].sum() - 1) < 1e-12


@pytest.mark.parametrize("command,files", [
    (["fit-f", "--rank", "9"], ["fit-f.curve.csv", "fit-f.fit.json"]),
    (["tweedie", "--boot", "3"], ["tweedie.curve.csv"]),
    (["fdr"], ["fdr.curve.csv"]),
    (["james-stein"], ["james-stein.csv"]),
])
def test_pipelines_on_z_values(tmp_path, capsys, command, files):
    src = tmp_path / "z.txt"
    io.write_grid(src, synthetic_zvalues(seed=1, N=2000))
    code, out, err = run(command + ["--input", str(src), "--out", str(tmp_path)], capsys)
    assert code == 0, err
    for name in files:
        assert (tmp_path / name).exists()
    man = json.loads((tmp_path / f"{command[0]}.manifest.json").read_text())
    assert man["inputs"]["z.txt"] == io.sha256_file(src)


def test_robbins_command(tmp_path, capsys):
    src = write(tmp_path, "counts.txt", "0\n0\n1\n1\n1\n2\n3\n")
    assert run(["robbins", "--input", str(src), "--out", str(tmp_path)], capsys)[0] == 0
    header, data = io.read_csv(tmp_path / "robbins.csv")
    assert header == ["x", "count", "estimate"]
    assert data[0, 2] == pytest.approx(1 * 3 / 2)


def test_simulate_and_mutually_exclusive_inputs(tmp_path, capsys):
    assert run(["simulate", "--scenario", "fig4", "--n", "50", "--out", str(tmp_path)], capsys)[0] == 0
    assert len((tmp_path / "simulate.fig4.csv").read_text().splitlines()) == 51
    code, _, _ = run(["tables", "4", "--input", "x", "--scenario", "fig1", "--out", str(tmp_path)],
                     capsys)
    assert code == 2


def test_reruns_are_byte_identical(tmp_path, capsys):
    for sub in ("a", "b"):
        assert run(["tables", "4", "--seed", "3", "--out", str(tmp_path / sub)], capsys)[0] == 0
    for name in ("table4.csv", "table4.manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
