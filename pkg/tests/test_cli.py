import json
import subprocess
import sys

import numpy as np
import pytest

from ifsjacobi import IFSSystem, julia_exact_jacobi
from ifsjacobi.cli import RunConfig, main, parse_config, ConfigError
from ifsjacobi.serialize import load_jacobi, read_csv, read_measure_csv, write_csv


@pytest.fixture
def ifs_files(tmp_path):
    IFSSystem.cantor().save(tmp_path / "cantor.json")
    IFSSystem.julia(2.1).save(tmp_path / "julia.json")
    return tmp_path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestBuild:
    def test_balanced(self, ifs_files, capsys):
        out = ifs_files / "c.csv"
        code, stdout, _ = run(["build", "--ifs", ifs_files / "cantor.json", "--kind", "balanced",
                               "--n", 8, "--rank", 128, "--out", out], capsys)
        assert code == 0
        assert load_jacobi(out).rank == 128
        assert json.loads(stdout)["atoms"] == 256

    def test_equilibrium(self, ifs_files, capsys):
        out = ifs_files / "j.csv"
        code, _, _ = run(["build", "--ifs", ifs_files / "julia.json", "--kind", "equilibrium",
                          "--n", 4, "--G", 200, "--rank", 200, "--out", out,
                          "--measure-out", ifs_files / "m.csv"], capsys)
        assert code == 0 and load_jacobi(out).rank == 200
        assert len(read_measure_csv(ifs_files / "m.csv")) == 3200

    def test_exact_julia(self, tmp_path, capsys):
        out = tmp_path / "e.csv"
        code, _, _ = run(["build", "--kind", "exact-julia", "--lambda", 2.1, "--rank", 1024,
                          "--out", out], capsys)
        assert code == 0
        J, E = load_jacobi(out), julia_exact_jacobi(2.1, 1024)
        np.testing.assert_array_equal(J.b, E.b)
        np.testing.assert_array_equal(J.a, E.a)

    def test_deterministic(self, ifs_files, capsys):
        args = ["build", "--ifs", ifs_files / "julia.json", "--kind", "equilibrium", "--n", 3,
                "--G", 50, "--rank", 100, "--seed", 4]
        run(args + ["--out", ifs_files / "a.csv"], capsys)
        run(args + ["--out", ifs_files / "b.csv", "--threads", 2], capsys)
        assert (ifs_files / "a.csv").read_bytes() == (ifs_files / "b.csv").read_bytes()

    def test_budget_exit(self, ifs_files, capsys):
        code, _, err = run(["build", "--ifs", ifs_files / "cantor.json", "--kind", "balanced",
                            "--n", 12, "--rank", 10, "--max-atoms", 100,
                            "--out", ifs_files / "x.csv"], capsys)
        assert code == 4 and json.loads(err)["error"] == "BudgetError"


class TestConfig:
    def test_all_problems_reported(self, capsys):
        code, _, err = run(["build", "--kind", "balanced", "--rank", -1, "--threads", 0], capsys)
        body = json.loads(err)
        assert code == 2
        assert len(body["problems"]) >= 4

    def test_config_file_and_override(self, ifs_files):
        cfg = ifs_files / "run.json"
        cfg.write_text(json.dumps({"ifs": str(ifs_files / "cantor.json"), "kind": "balanced",
                                   "n": 3, "rank": 8, "out": "x.csv"}))
        rc = parse_config(["build", "--config", str(cfg), "--n", "5"])
        assert rc.n == 5 and rc.rank == 8 and rc.ifs["kind"] == "affine"

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(ConfigError) as info:
            parse_config(["build", "--config", str(cfg)])
        assert any("bogus" in p for p in info.value.problems)

    def test_lambda_range(self):
        assert any("lambda" in p for p in
                   RunConfig("build", kind="exact-julia", lam=1.0, rank=4, out="x").problems())

    def test_experiment_id(self, tmp_path, capsys):
        code, _, _ = run(["experiment", 9, "--out", tmp_path], capsys)
        assert code == 2


class TestBatch:
    def test_potential(self, ifs_files, capsys):
        pts = ifs_files / "pts.csv"
        write_csv(pts, ["re", "im"], [(float(t), 0.1 + float(t)) for t in np.linspace(-1, 2, 100)])
        out = ifs_files / "pot.csv"
        code, _, _ = run(["potential", "--ifs", ifs_files / "cantor.json", "--n", 3, "--G", 100,
                          "--points", pts, "--out", out], capsys)
        assert code == 0
        _, rows = read_csv(out)
        assert len(rows) == 100 and len(rows[0]) == 5

    def test_potential_on_atom(self, ifs_files, capsys):
        run(["build", "--ifs", ifs_files / "cantor.json", "--kind", "balanced", "--n", 3,
             "--rank", 8, "--out", ifs_files / "c.csv", "--measure-out", ifs_files / "m.csv"],
            capsys)
        atom = float(read_measure_csv(ifs_files / "m.csv").x[2])
        write_csv(ifs_files / "bad.csv", ["re", "im"], [(atom, 0.0)])
        code, _, err = run(["potential", "--measure", ifs_files / "m.csv", "--points",
                            ifs_files / "bad.csv", "--out", ifs_files / "x.csv"], capsys)
        body = json.loads(err)
        assert code != 0 and body["atom"] == atom

    def test_conformal(self, ifs_files, capsys):
        out = ifs_files / "conf"
        code, _, _ = run(["conformal", "--ifs", ifs_files / "cantor.json", "--n", 3, "--G", 100,
                          "--lines", 31, "--count", 10, "--x", 0.5, 1.2, "--y", 5e-5, 4e-2,
                          "--out", out], capsys)
        assert code == 0
        assert len(list(out.glob("*.csv"))) == 31
        assert len(json.loads((out / "index.json").read_text())["polylines"]) == 31

    def test_conformal_needs_cap_for_jacobi(self, tmp_path, capsys):
        run(["build", "--kind", "exact-julia", "--lambda", 2.1, "--rank", 64,
             "--out", tmp_path / "e.csv"], capsys)
        code, _, err = run(["conformal", "--jacobi", tmp_path / "e.csv", "--lines", 2,
                            "--count", 3, "--x", 0, 1, "--y", 0.1, 0.2, "--out", tmp_path / "o"],
                           capsys)
        assert code == 2 and "cap" in err


class TestExperiments:
    def test_exp4(self, tmp_path, capsys):
        code, out, _ = run(["experiment", 4, "--out", tmp_path], capsys)
        summary = json.loads((tmp_path / "exp4_summary.json").read_text())
        assert code == 0 and summary["pass"]
        _, rows = read_csv(tmp_path / "exp4_table2.csv")
        assert rows[-1]["H_eps"] == "127"

    def test_exp7_interval_only(self, tmp_path, capsys):
        from ifsjacobi.experiments import run_experiment
        s = run_experiment(7, tmp_path, {"n": 2, "G": 40, "rank": 300, "G_ref": 200,
                                         "lines": 3, "count": 5, "G_cap": 500})
        names = {c["name"]: c for c in s["checks"]}
        assert names["[-1,1] J o F = id"]["value"] < 1e-8

    def test_bad_param(self, tmp_path, capsys):
        code, _, err = run(["experiment", 4, "--out", tmp_path, "--param", "nope=1"], capsys)
        assert code == 2

    def test_console_script(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "ifsjacobi.cli", "build", "--kind",
                            "exact-julia", "--lambda", "2", "--rank", "4", "--out",
                            str(tmp_path / "e.csv")], capture_output=True, text=True)
        assert r.returncode == 0
