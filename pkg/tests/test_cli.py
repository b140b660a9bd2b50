import json

import jsonschema
import numpy as np
import pytest

from finitecontext.cli import main, report_digest
from finitecontext.report import CHECK_SCHEMA, REPORT_SCHEMA, CheckReport
from finitecontext.sampleio import read_samples

BORN = "measure born dim 3\nrho = diag(0.5, 0.3, 0.2)\n"
QUAD = "measure quadratic dim 3\nrho = diag(0.5, 0.3, 0.2)\n"
AFFINE = """measure affine dim 4
eta = [[0.1, 0.2+0.1i, 0, 0], [0.2-0.1i, -0.3, 0, 0], [0, 0, 0.05, 0], [0, 0, 0, 0.15]]
K(1) = 0.25
K(2) = 0.4
"""


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in (("born", BORN), ("quadratic", QUAD), ("affine", AFFINE)):
        p = tmp_path / f"{name}.spec"
        p.write_text(text)
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


def _run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    status = main(argv + ["--out", str(out)])
    report = json.loads(out.read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    return status, report


def test_verify_gleason_born(files):
    status, rep = _run(["verify-gleason", "--measure", files["born"], "--dim", "3", "--samples", "500",
                        "--h", "1e-3", "--seed", "7"], files["dir"])
    assert status == 0 and rep["pass"]
    assert rep["config"]["seed"] == 7 and rep["config"]["h"] == 1e-3
    assert {c["check"] for c in rep["checks"]} >= {"lemma1", "fit_affine"}


def test_verify_gleason_quadratic_fails(files):
    status, rep = _run(["verify-gleason", "--measure", files["quadratic"], "--dim", "3", "--samples", "20"],
                       files["dir"])
    assert status == 1 and not rep["pass"]


def test_check_model_bb(files):
    status, rep = _run(["check-model", "--model", "bb", "--dim", "4", "--trials", "100000", "--seed", "1"],
                       files["dir"])
    assert status == 0
    assert rep["config"]["trials"] == 100000 and rep["config"]["workers"] == 1


def test_check_model_violator(files):
    status, rep = _run(["check-model", "--model", "leaky", "--dim", "3", "--trials", "10000"], files["dir"])
    assert status == 1
    failed = {c["check"] for c in rep["checks"] if not c["pass"]}
    assert failed == {"outcome_normalization"}


def test_fit_quadratic_exit_one(files):
    status, rep = _run(["fit", "--measure", files["quadratic"], "--dim", "3"], files["dir"])
    assert status == 1
    c = rep["checks"][0]
    assert c["max_residual"] > c["tolerance"]


def test_gen_data_then_fit(files):
    data = str(files["dir"] / "s.txt")
    argv = ["gen-data", "--measure", files["affine"], "--dim", "4", "--ranks", "1,2", "--count", "60",
            "--seed", "5", "--data-out", data]
    assert _run(argv, files["dir"])[0] == 0
    first = open(data).read()
    assert _run(argv, files["dir"])[0] == 0
    assert open(data).read() == first
    status, rep = _run(["fit", "--data", data], files["dir"])
    assert status == 0
    eta = np.array(rep["results"]["eta"]["re"]) + 1j * np.array(rep["results"]["eta"]["im"])
    expected = np.array([[0.1, 0.2 + 0.1j, 0, 0], [0.2 - 0.1j, -0.3, 0, 0], [0, 0, 0.05, 0], [0, 0, 0, 0.15]])
    assert np.linalg.norm(eta - expected) <= 1e-8
    assert rep["results"]["constants"]["1"] == pytest.approx(0.25, abs=1e-8)


def test_gen_data_empty(files):
    data = files["dir"] / "e.txt"
    status, _ = _run(["gen-data", "--measure", files["born"], "--dim", "3", "--count", "0",
                      "--data-out", str(data)], files["dir"])
    assert status == 0 and read_samples(data) == (3, [])


def test_reconstruct(files):
    status, rep = _run(["reconstruct", "--measure", files["born"], "--seed", "2"], files["dir"])
    assert status == 0
    rho = np.array(rep["results"]["rho"]["re"]) + 1j * np.array(rep["results"]["rho"]["im"])
    assert np.linalg.norm(rho - np.diag([0.5, 0.3, 0.2])) <= 1e-8


def test_reconstruct_not_a_state(files):
    p = files["dir"] / "bad.spec"
    p.write_text("measure born dim 3 rho = diag(0.6, 0.6, -0.2)")
    status, rep = _run(["reconstruct", "--measure", str(p)], files["dir"])
    assert status == 1
    assert "not a state" in rep["checks"][0]["details"]["error"]


def test_simulate_epr(files):
    csv_path = files["dir"] / "sweep.csv"
    status, rep = _run(["simulate-epr", "--points", "4", "--trials", "20000", "--seed", "3",
                        "--csv", str(csv_path)], files["dir"])
    assert status == 0
    assert csv_path.read_text().splitlines()[1].startswith("a_x,a_y,a_z")


def test_usage_errors(files, capsys):
    assert main(["fit", "--measure", files["born"], "--dim", "4"]) == 2
    assert main(["fit", "--measure", str(files["dir"] / "missing.spec")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["check-model", "--model", "bb", "--dim", "0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--measure", files["born"], "--tol", "-1"])
    assert exc.value.code == 2
    bad = files["dir"] / "bad.spec"
    bad.write_text("measure affine dim")
    assert main(["fit", "--measure", str(bad)]) == 2
    assert "line 1, column 19" in capsys.readouterr().err


def test_env_seed(files, monkeypatch):
    monkeypatch.setenv("FINITECONTEXT_SEED", "42")
    _, rep = _run(["fit", "--measure", files["born"]], files["dir"])
    assert rep["config"]["seed"] == 42
    monkeypatch.setenv("FINITECONTEXT_SEED", "x")
    assert main(["fit", "--measure", files["born"]]) == 2


def test_reports_deterministic(files):
    argv = ["check-model", "--model", "deterministic", "--dim", "3", "--trials", "10000", "--seed", "8"]
    _, a = _run(argv, files["dir"])
    _, b = _run(argv, files["dir"])
    assert a["digest"] == b["digest"] == report_digest(b)
    a.pop("timings"), b.pop("timings")
    assert a == b


def test_check_report_schema():
    rep = CheckReport("x", {"a": np.float64(1.0)}, np.inf, 1e-3, np.bool_(True), 3,
                      details={"m": np.eye(2) * 1j})
    d = rep.to_dict()
    jsonschema.validate(d, CHECK_SCHEMA)
    json.dumps(d, allow_nan=False)
    assert d["pass"] is True and d["max_residual"] == "inf"
