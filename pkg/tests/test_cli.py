import dataclasses
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gplandmark import shapes
from gplandmark.cli import RunConfig, main
from gplandmark.mesh_io import write_mesh, write_point_cloud


@pytest.fixture(scope="module")
def sphere_off(tmp_path_factory):
    path = tmp_path_factory.mktemp("in") / "sphere.off"
    write_mesh(shapes.icosphere(3), str(path))
    return str(path)


def _run(args, capsys=None):
    code = main(args)
    out = capsys.readouterr() if capsys else None
    return code, out


def test_run_defaults(sphere_off, tmp_path, capsys):
    code, _ = _run(["run", "--input", sphere_off, "--num-landmarks", "10", "--out", str(tmp_path)], capsys)
    assert code == 0
    tr = json.loads((tmp_path / "landmarks.json").read_text())
    assert len(set(tr["selected"])) == 10
    s = tr["sigma_history"]
    assert all(b <= a + 1e-10 for a, b in zip(s, s[1:]))
    assert tr["params"]["kernel_kind"] == "reweighted"
    assert (tmp_path / "landmarks.csv").exists()
    assert not (tmp_path / "convergence.svg").exists()


def test_run_is_deterministic(sphere_off, tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--input", sphere_off, "--num-landmarks", "25", "--seed", "42",
                     "--tie", "random", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/landmarks.json").read_bytes() == (tmp_path / "b/landmarks.json").read_bytes()


def test_manifest_is_complete(sphere_off, tmp_path):
    main(["run", "--input", sphere_off, "--num-landmarks", "5", "--out", str(tmp_path),
          "--emit", "trace,mspe_field,plot,report"])
    man = json.loads((tmp_path / "run_manifest.json").read_text())
    assert set(man["config"]) == {f.name for f in dataclasses.fields(RunConfig)}
    assert man["resolved"]["epsilon"] > 0 and man["config"]["epsilon"] == "auto"
    assert "timestamp" in man and "timestamp" not in (tmp_path / "landmarks.json").read_text()
    for name in ("mspe_field.csv", "convergence.svg", "report.json"):
        assert (tmp_path / name).exists()
    rows = (tmp_path / "mspe_field.csv").read_text().splitlines()
    assert rows[0] == "vertex_index,mspe" and len(rows) == 643


def test_budget_larger_than_input(sphere_off, tmp_path, capsys):
    code, out = _run(["run", "--input", sphere_off, "--num-landmarks", "5000", "--out", str(tmp_path)], capsys)
    assert code == 2
    line = out.err.strip()
    assert line.startswith("gplandmark: error code=CONFIG_ERROR:") and "\n" not in line


@pytest.mark.parametrize("flag,value", [("--lambda", "1.5"), ("--rho", "0"), ("--tolerance", "-1"),
                                        ("--epsilon", "-2"), ("--emit", "trace,movie")])
def test_bad_config(sphere_off, tmp_path, capsys, flag, value):
    code, out = _run(["run", "--input", sphere_off, "--out", str(tmp_path), flag, value], capsys)
    assert code == 2 and "code=CONFIG_ERROR" in out.err


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.off"
    bad.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    code, out = _run(["run", "--input", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 3 and "code=PARSE_ERROR" in out.err


def test_planar_cloud_reports_curvature_error(tmp_path, capsys):
    g = np.linspace(0, 1, 8)
    pts = np.column_stack([np.stack(np.meshgrid(g, g), -1).reshape(-1, 2), np.zeros(64)])
    path = tmp_path / "flat.xyz"
    np.savetxt(path, pts)
    code, out = _run(["run", "--input", str(path), "--num-landmarks", "3", "--out", str(tmp_path)], capsys)
    assert code == 4 and "code=ALL_ZERO_CURVATURE" in out.err
    code, _ = _run(["run", "--input", str(path), "--num-landmarks", "3", "--weights", "uniform",
                    "--out", str(tmp_path)], capsys)
    assert code == 0


def test_point_cloud_input(tmp_path):
    path = tmp_path / "cloud.xyz"
    write_point_cloud(shapes.sample_torus(400, seed=1), str(path))
    assert main(["run", "--input", str(path), "--num-landmarks", "20", "--knn", "8", "--out", str(tmp_path)]) == 0
    tr = json.loads((tmp_path / "landmarks.json").read_text())
    assert len(tr["selected"]) == 20


def test_weight_file(sphere_off, tmp_path):
    n = 642
    wfile = tmp_path / "w.csv"
    wfile.write_text("\n".join(f"{1.0 + (i % 3)},{1.0 / n}" for i in range(n)) + "\n")
    assert main(["run", "--input", sphere_off, "--num-landmarks", "8", "--weights", "file",
                 "--weights-file", str(wfile), "--out", str(tmp_path)]) == 0


def test_euclidean_kernel_and_fixed_epsilon(sphere_off, tmp_path):
    assert main(["run", "--input", sphere_off, "--kernel", "euclidean", "--epsilon", "0.25",
                 "--num-landmarks", "12", "--out", str(tmp_path)]) == 0
    tr = json.loads((tmp_path / "landmarks.json").read_text())
    assert tr["params"]["epsilon"] == 0.25 and tr["sigma_history"][0] == 1.0


def test_analyze(sphere_off, tmp_path, capsys):
    assert main(["run", "--input", sphere_off, "--num-landmarks", "30", "--out", str(tmp_path)]) == 0
    code, out = _run(["analyze", "--trace", str(tmp_path / "landmarks.json"), "--baselines", "40",
                      "--bound-check", "5", "--fit", "20:100", "--out", str(tmp_path / "rep")], capsys)
    assert code == 0, out.err
    rep = json.loads((tmp_path / "rep/report.json").read_text())
    (bc,) = rep["bound_checks"]
    assert bc["m"] == 5 and bc["pass"] and bc["lhs"] <= bc["rhs"]
    (fit,) = rep["fits"]
    assert fit["slope"] < 0 and 0 <= fit["r_squared"] <= 1
    for name in ("report.json", "report.csv", "convergence.svg"):
        assert (tmp_path / "rep" / name).exists()


def test_analyze_zero_baselines(sphere_off, tmp_path, capsys):
    main(["run", "--input", sphere_off, "--num-landmarks", "10", "--out", str(tmp_path)])
    code, out = _run(["analyze", "--trace", str(tmp_path / "landmarks.json"), "--baselines", "0",
                      "--bound-check", "5"], capsys)
    assert code == 2 and "code=CONFIG_ERROR" in out.err


def test_analyze_detects_tampered_trace(sphere_off, tmp_path, capsys):
    main(["run", "--input", sphere_off, "--num-landmarks", "10", "--out", str(tmp_path)])
    path = tmp_path / "landmarks.json"
    doc = json.loads(path.read_text())
    doc["selected"][3], doc["selected"][4] = doc["selected"][4], doc["selected"][3]
    path.write_text(json.dumps(doc))
    code, out = _run(["analyze", "--trace", str(path), "--fit", "2:10"], capsys)
    assert code == 3 and "VALIDATION_ERROR" in out.err


def test_console_script_with_thread_cap(sphere_off, tmp_path):
    env = dict(os.environ, GPLANDMARK_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "gplandmark.cli", "run", "--input", sphere_off,
                           "--num-landmarks", "4", "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "selected 4 landmarks" in proc.stdout
