import json
from pathlib import Path

from stepkdv.cli import main


def _write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def test_solve_zero_potential(tmp_path):
    cfg = _write(tmp_path, "run.json", {
        "potential": {"kind": "zero"},
        "x": {"start": -2.0, "stop": 2.0, "num": 5},
        "t": [0.5],
    })
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "solution.csv").read_text().strip().splitlines()
    assert rows[0] == "x,t,u,det,min_eig"
    assert len(rows) == 6
    for row in rows[1:]:
        u = float(row.split(",")[2])
        assert abs(u) < 1e-12
    manifest = json.loads((out / "solve_manifest.json").read_text())
    assert "auto_tuned" in manifest and "version" in manifest


def test_solve_reruns_bit_identical(tmp_path):
    cfg = _write(tmp_path, "run.json", {
        "potential": {"kind": "soliton", "kappa": 1.0},
        "x": {"start": -3.0, "stop": 3.0, "num": 7},
        "t": [0.25, 0.5],
    })
    outputs = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
        outputs.append((out / "solution.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_convergence_table(tmp_path):
    cfg = _write(tmp_path, "run.json", {
        "potential": {"kind": "pure_step", "h": 1.0},
        "bs": [-10.0, -20.0, -40.0],
        "x": 0.0, "t": 1.0,
    })
    out = tmp_path / "out"
    assert main(["convergence", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "convergence.csv").read_text().strip().splitlines()
    assert rows[0] == "b,u,diff"
    assert len(rows) == 4
    diffs = [float(r.split(",")[2]) for r in rows[2:]]
    assert diffs[1] < diffs[0]
    manifest = json.loads((out / "convergence_manifest.json").read_text())
    assert manifest["monotone"] is True


def test_scatter_outputs(tmp_path):
    cfg = _write(tmp_path, "run.json", {
        "potential": {"kind": "soliton", "kappa": 1.0},
        "k": [0.5, 1.0, 2.0],
    })
    out = tmp_path / "out"
    assert main(["scatter", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "scattering.csv").read_text().strip().splitlines()
    assert rows[0] == "k,R0_re,R0_im,A_re,A_im"
    assert len(rows) == 4
    manifest = json.loads((out / "scatter_manifest.json").read_text())
    assert len(manifest["bound_states"]) == 1
    assert abs(manifest["bound_states"][0]["kappa"] - 1.0) < 1e-9


def test_bad_config_exit_2(tmp_path):
    missing = str(tmp_path / "nope.json")
    assert main(["solve", "--config", missing, "--out", str(tmp_path)]) == 2
    cfg = _write(tmp_path, "bad.json", {"potential": {"kind": "wat"}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 2
    cfg2 = _write(tmp_path, "nogrid.json", {
        "potential": {"kind": "zero"}})
    assert main(["solve", "--config", cfg2, "--out", str(tmp_path)]) == 2


def test_unknown_subcommand_exit_2(tmp_path):
    assert main(["frobnicate"]) == 2


def test_validate_single_check(tmp_path):
    out = tmp_path / "out"
    code = main(["validate", "--checks", "5", "--out", str(out)])
    report = json.loads((out / "validate_report.json").read_text())
    ids = [c["id"] for c in report["checks"]]
    assert ids == [5]
    assert code == (0 if report["all_passed"] else 1)
    assert report["all_passed"]
