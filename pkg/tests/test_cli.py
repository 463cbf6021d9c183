import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from ppas.cli import main

FIXTURE = Path(__file__).parent / "fixtures" / "mini_bench.csv"


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_synth_csv(capsys):
    code, out, _ = _run(capsys, "synth", "--m", "20", "--replicates", "3", "--seed", "1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["estimator"] for r in rows][:2] == ["classical", "prediction_avg"]
    assert rows[0]["improved_pct"] == "baseline"


def test_synth_json_to_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = _run(
        capsys, "synth", "--m", "15", "--replicates", "3", "--predictor", "abs",
        "--moments", "sample", "--estimators", "pt,pas,unipas", "--format", "json", "--out", str(out),
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["predictor"] == "abs" and doc["config"]["moments"] == "sample"
    assert [r["estimator"] for r in doc["results"]] == ["classical", "pt", "pas", "unipas"]


def test_synth_worker_count_does_not_change_bytes(tmp_path, capsys):
    outs = []
    for w in ("1", "4"):
        p = tmp_path / f"w{w}.csv"
        assert _run(capsys, "synth", "--m", "20", "--replicates", "6", "--workers", w, "--out", str(p))[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_bench_single_and_sweep(tmp_path, capsys):
    code, out, _ = _run(capsys, "bench", "--data", str(FIXTURE), "--replicates", "3", "--estimators", "classical,pas")
    assert code == 0 and out.startswith("estimator,mse")
    pattern = str(tmp_path / "r{ratio}.csv")
    code, _, _ = _run(capsys, "bench", "--data", str(FIXTURE), "--replicates", "3", "--ratio", "0.2,0.8", "--out", pattern)
    assert code == 0
    assert (tmp_path / "r0.2.csv").exists() and (tmp_path / "r0.8.csv").exists()


def test_bench_sweep_to_stdout(capsys):
    code, out, _ = _run(capsys, "bench", "--data", str(FIXTURE), "--replicates", "2", "--ratio", "0.2,0.8",
                        "--estimators", "classical")
    assert code == 0 and out.count("# ratio=") == 2


def test_estimate(tmp_path, capsys):
    code, out, _ = _run(capsys, "estimate", "--data", str(FIXTURE), "--estimator", "unipas")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "problem_id,estimate" and len(lines) == 21
    assert lines[1].startswith("prob0,")


def test_estimate_with_moments_file(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("problem_id,split,y,f\na,labeled,1,1\na,labeled,2,2\na,unlabeled,,3\n"
                    "b,labeled,0,1\nb,labeled,4,3\nb,unlabeled,,2\n")
    mom = tmp_path / "m.csv"
    mom.write_text("problem_id,sigma2,tau2,gamma\na,1,1,0.5\nb,2,1,1\n")
    code, out, _ = _run(capsys, "estimate", "--data", str(data), "--moments-file", str(mom), "--estimator", "pt")
    assert code == 0
    # a: lambda* = (1/3) * 0.5 / 1, so 1.5 + (1/6) * (3 - 1.5) = 1.75
    assert out.splitlines()[1] == "a,1.75"


def test_cure_scan(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = _run(capsys, "cure-scan", "--m", "30", "--grid-size", "16", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "omega,risk" and len(lines) == 1 + 18
    assert lines[1].startswith("0.0,") and lines[-1].startswith("inf,")
    code, stdout, _ = _run(capsys, "cure-scan", "--data", str(FIXTURE), "--grid-size", "8")
    assert code == 0 and stdout.splitlines()[-1].startswith("inf,")


def test_exit_code_input_errors(tmp_path, capsys):
    code, _, err = _run(capsys, "estimate", "--data", str(tmp_path / "missing.csv"))
    assert code == 2 and "error" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("problem_id,split,y,f\np,labeled,x,1\n")
    code, _, err = _run(capsys, "estimate", "--data", str(bad))
    assert code == 2 and "row 2" in err
    assert _run(capsys, "synth", "--m", "5", "--replicates", "1")[0] == 2
    assert _run(capsys, "bench", "--data", str(FIXTURE), "--ratio", "1.5")[0] == 2


def test_exit_code_numeric_failure(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("problem_id,split,y,f\na,labeled,1e308,1\na,labeled,-1e308,2\na,unlabeled,,3\n"
                    "b,labeled,1e308,1\nb,labeled,-1e308,3\nb,unlabeled,,2\n")
    code, _, err = _run(capsys, "estimate", "--data", str(data), "--estimator", "pas")
    assert code == 3 and "numeric" in err


def test_argparse_rejects_unknown_estimator(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--estimators", "bogus"])
    assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "ppas", "synth", "--m", "8", "--replicates", "2", "--estimators", "classical"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0 and res.stdout.startswith("estimator,mse")
