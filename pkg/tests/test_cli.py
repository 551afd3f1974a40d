import csv
import io
import json

import pytest

from skewergodic.cli import main
from skewergodic.linalg import J_block
from skewergodic.local_field import FieldSpec


@pytest.fixture
def j_file(tmp_path):
    path = tmp_path / "A.json"
    path.write_text(json.dumps(J_block(FieldSpec.padic(3)).to_json()))
    return path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_canon_identity(capsys, j_file):
    code, out, err = run(capsys, "canon", "--field", "padic", "--p", "3", "--in", str(j_file), "--seed", "1")
    assert code == 0
    d = json.loads(out)
    assert d["schema"] == "1" and d["exponents"] == [0]
    g = d["g"]
    assert g["rows"] == g["cols"] == 2
    assert "seed: 1" in err


def test_charfn_example(capsys):
    code, out, _ = run(capsys, "charfn", "--field", "padic", "--p", "3", "--spikes", "1", "--tail", "-inf",
                       "--ells", "0", "--trials", "100000", "--seed", "7")
    d = json.loads(out)
    assert code == 0 and d["pass"] and d["main_term_exact"] == "1/9"
    assert d["main_term"] == pytest.approx(1 / 9)


def test_generated_seed_is_printed_and_replays(capsys):
    code, out1, err = run(capsys, "sample", "--spikes", "1", "--corner", "2", "--count", "2")
    seed = int(err.split("seed: ")[1].split()[0])
    code2, out2, _ = run(capsys, "sample", "--spikes", "1", "--corner", "2", "--count", "2", "--seed", str(seed))
    assert code == code2 == 0 and out1 == out2
    assert len(json.loads(out1)["samples"]) == 2


def test_orbital_and_glmat(capsys):
    code, out, _ = run(capsys, "orbital", "--D", "1,0", "--A", "0", "--trials", "20000", "--seed", "2")
    assert code == 0 and json.loads(out)["bound"] == pytest.approx(214 / 2187)
    code, out, _ = run(capsys, "glmat", "--n", "1")
    d = json.loads(out)
    assert code == 0 and d["gap_exact"] == "1/2"


def test_correspond(capsys):
    code, out, _ = run(capsys, "correspond", "--x", "0", "--y", "0", "--trials", "1000", "--object-trials", "100", "--seed", "1")
    assert code == 0 and json.loads(out)["estimate"]["re"] == 1.0
    code, _, err = run(capsys, "correspond", "--x", "0", "--y", "1", "--seed", "1")
    assert code == 2 and "error" in err


def test_suite_deterministic(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"suite": "orbital", "seed": 5, "trials": 1000,
                               "grid": {"sizes": [1], "primes": [3], "exponents": [0, 1]}}))
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert run(capsys, "suite", "--config", str(cfg), "--out", str(a), "--threads", "1")[0] == 0
    code, _, err = run(capsys, "suite", "--config", str(cfg), "--out", str(b), "--threads", "2")
    assert code == 0 and "seed: 5" in err
    assert a.read_bytes() == b.read_bytes()


def test_suite_failure_exit_code(capsys, tmp_path):
    # with controls expected to pass, the control case makes the suite fail
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"suite": "exchangeability", "trials": 2000,
                               "grid": {"signatures": [{"spikes": [], "tail": "0"}], "bins": 5,
                                        "alpha": 1.0}}))
    code, out, err = run(capsys, "suite", "--config", str(cfg), "--seed", "1", "--threads", "1")
    assert code == 1 and "FAIL" in err
    assert json.loads(out)["pass"] is False


def test_csv_and_env_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SKEWERGODIC_OUTPUT_DIR", str(tmp_path))
    code, out, err = run(capsys, "suite", "--name", "glmat", "--seed", "3", "--format", "csv", "--threads", "1")
    assert code == 0 and out == ""
    rows = list(csv.DictReader(io.StringIO((tmp_path / "suite-glmat-3.csv").read_text())))
    assert len(rows) == 4 and {r["pass"] for r in rows} == {"True"}


@pytest.mark.parametrize("argv", [
    ["sample", "--field", "laurent", "--p", "2"],
    ["sample", "--p", "4"],
    ["charfn", "--trials", "10"],
    ["suite"],
    ["suite", "--name", "charfn", "--trials", "10"],
    ["canon", "--in", "/nonexistent/A.json"],
    ["bogus"],
    ["orbital", "--D", "1"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_lenient_canon(capsys, tmp_path):
    spec = FieldSpec.padic(3)
    from skewergodic.linalg import LocalMatrix
    from skewergodic.local_field import LocalElem
    z = LocalElem.zero(spec, 5)
    A = LocalMatrix(spec, [[LocalElem.zero(spec), z], [-z, LocalElem.zero(spec)]])
    path = tmp_path / "Z.json"
    path.write_text(json.dumps(A.to_json()))
    assert run(capsys, "canon", "--in", str(path))[0] == 2
    code, out, _ = run(capsys, "canon", "--in", str(path), "--lenient")
    assert code == 0 and json.loads(out)["exponents"] == ["-inf"]
