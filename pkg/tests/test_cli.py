from pathlib import Path

import pytest

from mforge.cli import main

SUITE = """\
suite: small
scenarios:
  - name: mm1
    claim: "reflected workload"
    process:
      kind: levy
      net_drift: -1.0
      nu: {densities: [{family: exponential, rate: 1.0, mass: 0.5}]}
    y: reflection
    martingale: laplace_kw
    alpha: 1.0
    horizon: 2.0
    dt: 0.05
    n_paths: 300
    seed: 3
    checks:
      - {kind: zero_mean, times: [1.0, 2.0]}
      - {kind: isometry, times: [2.0], rel_tol: 0.25}
      - {kind: pathwise, identity: laplace_kw, tol: 1.0e-8, n_paths: 5}
"""


@pytest.fixture
def suite_file(tmp_path):
    p = tmp_path / "suite.yaml"
    p.write_text(SUITE)
    return p


def _csvs(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_run_writes_results_and_is_deterministic(suite_file, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--out-dir", str(a), "run", str(suite_file)]) == 0
    assert main(["run", str(suite_file), "--out-dir", str(b), "--threads", "2"]) == 0
    out = capsys.readouterr().out
    assert "suite GREEN: 3/3 checks green" in out
    files = _csvs(a)
    assert set(files) == {"results/mm1/00_zero_mean.csv", "results/mm1/01_isometry.csv", "results/mm1/02_pathwise.csv", "results/summary.csv"}
    assert files == _csvs(b)
    assert (a / "plots" / "mm1" / "01_isometry.svg").read_text().startswith("<svg")


def test_seed_override_changes_results(suite_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["--out-dir", str(a), "run", str(suite_file)])
    main(["--out-dir", str(b), "--seed-override", "77", "run", str(suite_file)])
    assert _csvs(a)["results/mm1/00_zero_mean.csv"] != _csvs(b)["results/mm1/00_zero_mean.csv"]


def test_describe_prints_exponents(suite_file, capsys):
    assert main(["describe", str(suite_file)]) == 0
    out = capsys.readouterr().out
    assert "phi(1) = 0.75" in out
    assert "alpha phi'(0)/phi(alpha) at 1: 0.666666666667" in out
    assert "E X_1 = -0.5" in out


def test_histogram(suite_file, tmp_path, capsys):
    out_dir = tmp_path / "h"
    assert main(["--out-dir", str(out_dir), "histogram", str(suite_file), "--scenario", "mm1", "--bins", "8", "--n-paths", "100"]) == 0
    assert "exploratory" in capsys.readouterr().out
    rows = (out_dir / "results" / "mm1" / "histogram.csv").read_text().splitlines()
    assert rows[1] == "bin_left,bin_right,count" and len(rows) == 10
    assert sum(int(r.split(",")[2]) for r in rows[2:]) == 100


def test_exit_codes(suite_file, tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SUITE.replace("dt: 0.05", "dt: 5.0"))
    assert main(["describe", str(bad)]) == 2
    assert "config error: line 13: field 'scenarios[0].dt'" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert main(["--threads", "0", "describe", str(suite_file)]) == 2
    assert main(["histogram", str(suite_file), "--scenario", "nope"]) == 2
    empty = tmp_path / "empty.yaml"
    empty.write_text("suite: e\nscenarios: []\n")
    assert main(["--out-dir", str(tmp_path / "e"), "run", str(empty)]) == 0
    assert "empty scenario list" in capsys.readouterr().out


def test_red_suite_exits_one(tmp_path):
    red = tmp_path / "red.yaml"
    # a wrong tolerance makes every run of the check fail
    red.write_text(SUITE.replace("tol: 1.0e-8", "tol: -1.0"))
    assert main(["--out-dir", str(tmp_path / "r"), "run", str(red)]) == 1
    summary = (tmp_path / "r" / "results" / "summary.csv").read_text()
    assert "suite,,,,false" in summary
    assert (tmp_path / "r" / "results" / "mm1" / "02_pathwise_rerun.csv").exists()
