import json

import numpy as np
import pytest

from plaplace.cli import UsageError, main, parse_generator
from plaplace.io import load_profile, read_report


def records(path):
    return read_report(path)["records"]


def by_check(recs, check):
    return [r for r in recs if r["details"].get("check") == check]


def test_extremal_exp_critical(tmp_path, capsys):
    code = main(["extremal", "--N", "10", "--p", "2", "--f", "exp", "--out", str(tmp_path)])
    assert code == 0
    recs = records(tmp_path / "extremal.json")
    lam = [r for r in recs if r["statement_id"] == "remark13.lambda_star"]
    assert lam and lam[0]["fitted_constant"] == pytest.approx(16.0, rel=1e-2)
    assert lam[0]["tolerance"] is not None
    ii = [r for r in recs if r["statement_id"] == "theorem12.ii"][0]
    assert ii["fitted_constant"] == pytest.approx(1.0, rel=1e-6)
    assert (tmp_path / "extremal-extremal.csv").exists()


def test_verify_full_suite_on_saved_power_extremal(tmp_path):
    assert main(["extremal", "--N", "11", "--p", "2", "--f", "power", "--name", "pow", "--out", str(tmp_path)]) == 0
    code = main(["verify", "--profile", str(tmp_path / "pow-extremal.csv"), "--N", "11", "--p", "2", "--f", "power",
                 "--lambda", "2.925444679663", "--out", str(tmp_path)])
    assert code == 0
    recs = records(tmp_path / "verify.json")
    ids = {r["statement_id"].split(".")[0] for r in recs}
    assert {"lemma21", "prop22", "theorem14", "theorem15", "lemma23", "lemma24", "theorem12"} <= ids
    assert not [r for r in recs if r["verdict"] == "fail"]


def test_solve_amplitude_search(tmp_path):
    code = main(["solve", "--N", "3", "--p", "2", "--f", "exp", "--lambda", "1", "--amplitude-search",
                 "--out", str(tmp_path)])
    assert code == 0
    prof = load_profile(tmp_path / "solve.csv", 3, 2.0)
    assert np.all(np.diff(prof.u) < 0)
    recs = records(tmp_path / "solve.json")
    assert all(r["verdict"] == "pass" for r in recs)
    assert all(r["statement_id"] == "plumbing" for r in recs)


def test_verify_catches_corrupted_profile(tmp_path, capsys):
    assert main(["solve", "--N", "3", "--p", "2", "--amplitude", "0.5", "--out", str(tmp_path)]) == 0
    lam = [r for r in records(tmp_path / "solve.json") if r["details"].get("check") == "lambda"][0]["fitted_constant"]
    lines = (tmp_path / "solve.csv").read_text().splitlines()
    rs = np.array([float(line.split(",")[0]) for line in lines[1:]])
    k = 1 + int(np.searchsorted(rs, 0.7))
    cells = lines[k].split(",")
    cells[2] = repr(-float(cells[2]))
    lines[k] = ",".join(cells)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    code = main(["verify", "--profile", str(bad), "--suite", "lemma24", "--N", "3", "--p", "2",
                 "--lambda", repr(lam), "--out", str(tmp_path), "--name", "bad"])
    assert code == 1
    err = capsys.readouterr().err
    assert "FAILED: lemma24" in err
    clean = main(["verify", "--profile", str(tmp_path / "solve.csv"), "--suite", "lemma24", "--N", "3", "--p", "2",
                  "--lambda", repr(lam), "--out", str(tmp_path), "--name", "good"])
    assert clean == 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# minimal solve\nN = 3\np = 2\namplitude = 0.3\nmesh-count = 250\n")
    code = main(["solve", "--config", str(cfg), "--amplitude", "0.2", "--out", str(tmp_path)])
    assert code == 0
    meta = read_report(tmp_path / "solve.json")["metadata"]
    assert meta["config"]["amplitude"] == 0.2
    assert meta["config"]["mesh_count"] == 250
    assert meta["config"]["N"] == 3


def test_env_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("PLAPLACE_OUT", str(tmp_path))
    assert main(["family", "--N", "10", "--p", "2", "--h", "zero", "--mesh-count", "200"]) == 0
    recs = records(tmp_path / "family.json")
    certs = [r for r in recs if r["statement_id"].startswith("theorem31.")]
    assert len(certs) == 6 and all(r["verdict"] == "pass" for r in certs)
    assert by_check(recs, "roundtrip_residual")[0]["verdict"] == "pass"


def test_demo_blowup(tmp_path):
    assert main(["demo-blowup", "--N", "10", "--p", "2", "--order", "1", "--terms", "2", "--out", str(tmp_path)]) == 0
    ids = [r["statement_id"] for r in records(tmp_path / "demo-blowup.json")]
    assert "prop33.u_r.n1" in ids and "prop33.u_r.n2" in ids


def test_report_aggregates(tmp_path, capsys):
    assert main(["family", "--N", "10", "--p", "2", "--out", str(tmp_path), "--name", "a", "--mesh-count", "200"]) == 0
    assert main(["family", "--N", "11", "--p", "2", "--out", str(tmp_path), "--name", "b", "--mesh-count", "200"]) == 0
    code = main(["report", str(tmp_path / "a.json"), str(tmp_path / "b.json"), "--out", str(tmp_path)])
    assert code == 0
    doc = read_report(tmp_path / "reproduction.json")
    sources = doc["records"][0]["details"]["sources"]
    assert {s["source"] for s in sources} == {"a.json", "b.json"}


def test_reports_deterministic(tmp_path):
    for name in ("one", "two"):
        assert main(["solve", "--N", "3", "--p", "2", "--amplitude", "0.4", "--out", str(tmp_path), "--name", name]) == 0
    docs = []
    for name in ("one", "two"):
        d = json.loads((tmp_path / f"{name}.json").read_text())
        d["metadata"].pop("timestamp")
        d["metadata"]["config"].pop("name")
        for prof in d["profiles"]:
            prof.pop("path")
        docs.append(json.dumps(d, sort_keys=True))
    assert docs[0] == docs[1]
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()


@pytest.mark.parametrize("argv", [
    ["solve", "--N", "1", "--p", "2", "--amplitude", "1"],
    ["solve", "--p", "2", "--amplitude", "1"],
    ["solve", "--N", "3", "--p", "2"],
    ["solve", "--N", "3", "--p", "0.5", "--amplitude", "1"],
    ["family", "--N", "10", "--p", "2", "--h", "wiggle"],
    ["demo-blowup", "--N", "5", "--p", "2"],
    ["nonsense"],
])
def test_usage_errors_exit_two(argv, tmp_path, capsys):
    assert main(argv + ([] if argv == ["nonsense"] else ["--out", str(tmp_path)])) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["solve", "--N", "3", "--p", "2", "--amplitude", "0.3", "--out", str(blocker / "sub")]) == 2


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_parse_generator():
    h = parse_generator("bumps:0.5,0.1,2;0.2,0.05,3")
    assert float(h(0.5)) == 2.0 and float(h(0.2)) == 3.0
    assert float(parse_generator("power:2,1")(0.5)) == 1.0
    with pytest.raises(UsageError):
        parse_generator("bumps:0.5,0.1")


def test_version_flag(capsys):
    assert main(["--version"]) == 0


def test_stability_on_saved_critical_extremal(tmp_path):
    assert main(["extremal", "--N", "10", "--p", "2", "--out", str(tmp_path)]) == 0
    code = main(["stability", "--profile", str(tmp_path / "extremal-extremal.csv"), "--N", "10", "--p", "2",
                 "--lambda", "16", "--extrapolate", "--out", str(tmp_path)])
    assert code == 0
    recs = {r["details"]["route"]: r for r in records(tmp_path / "stability.json")}
    assert abs(recs["extrapolated"]["fitted_constant"]) < 1e-4
    assert recs["eigen"]["verdict"] == "semistable"
    assert recs["eigen"]["details"]["mass"] == "hardy"


def test_stability_of_fresh_minimal_solution(tmp_path):
    assert main(["stability", "--N", "3", "--p", "2", "--lambda", "0.5", "--out", str(tmp_path)]) == 0
    (rec,) = [r for r in records(tmp_path / "stability.json") if r["statement_id"] == "section1.semistability"]
    assert rec["fitted_constant"] > 0.0 and rec["verdict"] == "semistable"
    assert (tmp_path / "stability.csv").exists()
