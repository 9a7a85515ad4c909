from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from psun.cli import CliError, build_prior, ingest_csv, main


def _write_csv(path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def toy_csv(tmp_path, rng):
    rows = [[int(rng.random() < 0.5), f"{rng.normal():.4f}", f"{rng.normal():.4f}"]
            for _ in range(10)]
    rows[3][2] = "NA"
    return _write_csv(tmp_path / "toy.csv", ["y", "a", "b"], rows)


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1])


def test_ingest_drops_na_rows(toy_csv):
    design, report, record = ingest_csv(toy_csv)
    assert design.n == 9 and report.n_rows_dropped == 1
    assert design.names == ("(Intercept)", "a", "b")
    assert np.allclose(design.x[:, 1:].std(axis=0, ddof=1), 0.5)
    raw, _, rec = ingest_csv(toy_csv, standardize_x=False, intercept=False)
    assert raw.p == 2 and rec is None


def test_ingest_pima_protocol(data_dir):
    design, report, _ = ingest_csv(data_dir / "pima2_synthetic.csv", response="diabetes",
                                   positive="pos", drop_columns=["triceps", "insulin"])
    assert design.n == 724
    assert design.p - 1 == 6
    assert report.n_rows_dropped == 44


def test_ingest_errors(tmp_path):
    bad = _write_csv(tmp_path / "bad.csv", ["y", "a"], [[2, 1.0], [0, 2.0]])
    with pytest.raises(CliError, match="binary"):
        ingest_csv(bad)
    empty = _write_csv(tmp_path / "empty.csv", ["y", "a"], [["NA", 1.0], [1, "NA"]])
    with pytest.raises(CliError, match="no rows"):
        ingest_csv(empty)
    const = _write_csv(tmp_path / "const.csv", ["y", "a", "b"], [[0, 1.0, 3], [1, 1.0, 4]])
    with pytest.raises(CliError, match="constant"):
        ingest_csv(const)
    with pytest.raises(CliError):
        ingest_csv(tmp_path / "missing.csv")
    with pytest.raises(CliError):
        ingest_csv(const, response="outcome")


def test_sage_shaped_file(tmp_path, rng):
    x = rng.standard_normal((74, 516))
    y = rng.integers(0, 2, 74)
    path = _write_csv(tmp_path / "sage.csv", ["y"] + [f"tag{j}" for j in range(516)],
                      [[int(a)] + [f"{v:.5f}" for v in r] for a, r in zip(y, x)])
    design, _, _ = ingest_csv(path, link="logit")
    assert design.n == 74 and design.p == 517


def test_fit_roundtrip_and_determinism(toy_csv, tmp_path, capsys):
    args = ["fit", "--data", str(toy_csv), "--link", "logit", "--prior", "laplace",
            "--iters", "400", "--burnin", "100", "--chains", "2", "--seed", "7", "--plot"]
    code, res = _run(args + ["--out", str(tmp_path / "a")], capsys)
    assert code == 0 and res["status"] == "ok" and res["draws"] == 600
    code, _ = _run(args + ["--out", str(tmp_path / "b")], capsys)
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "draws.csv").read_bytes() == (b / "draws.csv").read_bytes()
    for f in ("summary.json", "metadata.json", "trace.svg", "acf.svg"):
        assert (a / f).exists()
    header = (a / "draws.csv").read_text().splitlines()[0].split(",")
    assert header == ["chain", "(Intercept)", "a", "b"]
    meta = json.loads((a / "metadata.json").read_text())
    assert meta["seed"] == 7 and len(meta["config_hash"]) == 64 and "git_revision" in meta
    code, _ = _run(["diagnose", "--draws", str(a / "draws.csv"), "--out", str(tmp_path / "d")],
                   capsys)
    assert code == 0
    assert (tmp_path / "d" / "summary.json").read_text() == (a / "summary.json").read_text()


def test_config_precedence(toy_csv, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"link": "probit", "iters": 150, "burnin": 50,
                               "omega_slope": 3.0, "omega-intercept": 9.0}))
    code, res = _run(["fit", "--data", str(toy_csv), "--config", str(cfg), "--seed", "1",
                      "--iters", "120", "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and res["draws"] == 70
    meta = json.loads((tmp_path / "o" / "metadata.json").read_text())
    assert meta["config"]["link"] == "probit"
    assert meta["omega_diag"] == [9.0, 3.0, 3.0]


def test_build_prior_overrides():
    pr = build_prior({"prior": "gaussian", "link": "logit", "omega_intercept": None,
                      "omega_slope": 2.0}, 3, True)
    assert np.allclose(np.diag(pr.omega), [256.0, 2.0, 2.0])
    with pytest.raises(CliError):
        build_prior({"prior": "cauchy", "link": "logit", "omega_intercept": 1.0,
                     "omega_slope": None}, 3, True)
    pr = build_prior({"prior": "cauchy", "link": "logit", "omega_intercept": 4.0,
                      "omega_slope": 1.0}, 3, True)
    assert pr.family == "cauchy"


def test_error_json(tmp_path, capsys):
    code, res = _run(["fit", "--data", str(tmp_path / "nope.csv"), "--seed", "1",
                      "--out", str(tmp_path / "e")], capsys)
    assert code != 0 and res["status"] == "error" and res["error"] == "missing_file"
    assert json.loads((tmp_path / "e" / "error.json").read_text())["error"] == "missing_file"


def test_seed_is_required(toy_csv, tmp_path, capsys):
    assert main(["fit", "--data", str(toy_csv), "--out", str(tmp_path)]) != 0


def test_marginal_toy(tmp_path, capsys):
    path = _write_csv(tmp_path / "m.csv", ["y", "x"], [[1, 0.3], [0, -1.2], [1, 0.8]])
    code, res = _run(["marginal", "--data", str(path), "--link", "logit", "--seed", "3",
                      "--n-mc", "300", "--out", str(tmp_path / "m")], capsys)
    assert code == 0
    ml = json.loads((tmp_path / "m" / "marginal.json").read_text())
    assert 0 < ml["marginal_likelihood"] < 1 and ml["se"] >= 0 and ml["n"] == 3


def test_prior_sample(tmp_path, capsys):
    code, res = _run(["prior-sample", "--link", "logit", "--prior", "laplace", "--p", "3",
                      "--n-draws", "200", "--seed", "2", "--out", str(tmp_path / "p")], capsys)
    assert code == 0
    rows = (tmp_path / "p" / "draws.csv").read_text().splitlines()
    assert rows[0] == "chain,(Intercept),x1,x2" and len(rows) == 201


def test_coverage_study_command(tmp_path, capsys):
    code, res = _run(["coverage-study", "--reps", "2", "--n", "8", "--p", "3", "--iters", "200",
                      "--burnin", "50", "--combos", "probit:laplace", "--seed", "1", "--plot",
                      "--out", str(tmp_path / "c")], capsys)
    assert code == 0
    header = (tmp_path / "c" / "coverage.csv").read_text().splitlines()[0].split(",")
    assert len([h for h in header if h.startswith("q")]) == 19
    assert (tmp_path / "c" / "coverage.svg").exists()


def test_coverage_study_cauchy_needs_scales(tmp_path, capsys):
    code, res = _run(["coverage-study", "--reps", "1", "--combos", "logit:cauchy", "--seed", "1",
                      "--out", str(tmp_path / "c")], capsys)
    assert code != 0 and res["error"] == "missing_hyperparameter"
