from __future__ import annotations

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from pointscore.cli import main, parse_weights
from pointscore.core import SchemaMismatchError
from pointscore.simgen import SimConfig, generate


def _run(args, capsys):
    code = main([str(a) for a in args])
    return code, capsys.readouterr()


@pytest.fixture
def s1_csv(tmp_path):
    path = tmp_path / "s1.csv"
    generate(SimConfig("s1", 300, seed=3)).data.to_csv(path)
    return path


def test_fit_and_eval_round_trip(tmp_path, s1_csv, capsys):
    out = tmp_path / "fit.json"
    code, _ = _run(["fit", s1_csv, "--method", "greedy", "--L", 1, "-o", out], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert set(doc["weights"]) == {f"x{j}" for j in range(1, 21)}
    code, cap = _run(["eval", s1_csv, "--weights", out], capsys)
    assert code == 0
    assert json.loads(cap.out)["auc"] == doc["train_auc"]


def test_eval_inline_and_zero_weights(s1_csv, capsys):
    code, cap = _run(["eval", s1_csv, "--weights", ",".join(["0"] * 20)], capsys)
    assert code == 0 and json.loads(cap.out)["auc"] == 0.5
    named = ",".join(f"x{j}={int(j <= 6)}" for j in range(1, 21))
    code, cap = _run(["eval", s1_csv, "--weights", named, "--format", "csv"], capsys)
    assert code == 0 and cap.out.startswith("auc,n,n1,n0")


def test_eval_name_mismatch_exit_4(s1_csv, capsys):
    code, cap = _run(["eval", s1_csv, "--weights", "x1=1,bogus=2"], capsys)
    assert code == 4 and "bogus" in cap.err
    with pytest.raises(SchemaMismatchError):
        parse_weights("1,2", ("a", "b", "c"))


def test_malformed_cell_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("y,a,b\n0,1,0\n1,1,2\n")
    code, cap = _run(["fit", path], capsys)
    assert code == 2 and "row 2" in cap.err and "'b'" in cap.err


def test_single_class_exit_3(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text("y,a\n1,1\n1,0\n")
    code, _ = _run(["fit", path], capsys)
    assert code == 3


def test_budget_exit_5(capsys):
    code, _ = _run(["complexity", "--monte-carlo", "--p", 30, "--n", 100], capsys)
    assert code == 5


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "x.csv", "--bogus"])
    assert exc.value.code == 2


def test_logistic_rounding_fallback_flagged(tmp_path, capsys):
    rng = np.random.default_rng(5)
    X = rng.integers(0, 2, (400, 3))
    y = (rng.random(400) < 0.7 - 0.2 * X.sum(axis=1)).astype(int)
    path = tmp_path / "protective.csv"
    path.write_text("y,a,b,c\n" + "".join(f"{yi},{r[0]},{r[1]},{r[2]}\n" for yi, r in zip(y, X)))
    code, cap = _run(["fit", path, "--method", "logistic_rounding"], capsys)
    assert code == 0 and json.loads(cap.out)["penalized_fallback"] is True


def test_simulate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert _run(["simulate", "--setting", "s3", "--n", 1000, "--seed", 7, "-o", path], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 7 and "version" in manifest
    _run(["simulate", "--setting", "s2", "--n", 50, "--diagnostics", "-o", a], capsys)
    assert a.read_text().splitlines()[0].endswith("__contaminated")


def test_complexity_closed_form(capsys):
    code, cap = _run(["complexity", "--closed-form", "--p", 20, "--L", 1], capsys)
    record = json.loads(cap.out)
    assert code == 0 and abs(record["esc"] - 7.173) < 1e-3
    code, cap = _run(["complexity", "--p", "4,5", "--L", "1,2", "--n", 200, "--table"], capsys)
    assert cap.out.splitlines()[0].startswith("p,L,n,source,esc")
    assert len(cap.out.splitlines()) == 5


def test_experiment_under_a_minute(tmp_path):
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pointscore.cli", "experiment", "--setting", "s1", "--B", "10", "-o", str(tmp_path)],
        capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    assert elapsed < 60
    for name in ("results_long.csv", "summary.csv", "manifest.json"):
        assert (tmp_path / name).exists()


def test_bench_small_grid(tmp_path, capsys):
    code, _ = _run(["bench", "--L-values", "1", "--p-values", "5", "--n-values", "100", "--replicates", 1,
                    "--repeats", 1, "--methods", "greedy,logistic", "-o", tmp_path], capsys)
    assert code == 0
    assert (tmp_path / "figure2.csv").read_text().startswith("vary,value,method,mean_seconds")
