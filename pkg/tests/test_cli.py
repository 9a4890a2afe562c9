import json
import subprocess
import sys

import pytest

from gft.cli import RunConfig, build_parser, config_from_args, main, run
from gft.errors import ValidationError


def _csv(path):
    lines = path.read_text().splitlines()
    meta = dict(l[2:].split(": ", 1) for l in lines if l.startswith("# "))
    rows = [l.split(",") for l in lines if not l.startswith("#")]
    return meta, rows[0], rows[1:]


def test_eigs_torus(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["eigs", "--manifest", "Torus2", "--n", "16,16", "--k", "13", "--out", str(out)]) == 0
    meta, header, rows = _csv(out)
    assert meta["format_version"] == "1"
    assert header == ["index", "lambda", "cluster", "multiplicity"]
    assert meta["clusters"] == "0x1 1x4 2x4 4x4"
    assert len(rows) == 13


def test_eigs_from_manifest_file(tmp_path):
    from gft.manifold import catalog

    m = tmp_path / "torus2.json"
    m.write_text(json.dumps(catalog("Torus2").to_manifest()))
    out = tmp_path / "spec.csv"
    assert main(["eigs", "--manifest", str(m), "--n", "16,16", "--k", "13", "--out", str(out)]) == 0
    assert _csv(out)[0]["clusters"] == "0x1 1x4 2x4 4x4"


def _ball_masa(tmp_path):
    masa = tmp_path / "masa.json"
    argv = ["masa", "--manifest", "Ball3", "--n", "10,20,16", "--k", "40", "--out", str(masa)]
    assert main(argv) == 0
    return masa


def test_classify_ball(tmp_path):
    masa = _ball_masa(tmp_path)
    data = json.loads(masa.read_text())
    assert data["format_version"] == 1 and data["degeneracy_present"]
    top = data["candidates"][0]
    assert "commutators" in top and top["resolved_count"] > 0
    out = tmp_path / "class.json"
    assert main(["classify", "--manifest", "Ball3", "--masa", str(masa), "--out", str(out)]) == 0
    cls = json.loads(out.read_text())
    assert (cls["algebraic"], cls["topology"]) == ("TypeI", "SD")


def test_missing_frobenius_exit_4(tmp_path, capsys):
    masa = _ball_masa(tmp_path)
    data = json.loads(masa.read_text())
    del data["candidates"][0]["frobenius_pass"]
    masa.write_text(json.dumps(data))
    out = tmp_path / "class.json"
    assert main(["classify", "--manifest", "Ball3", "--masa", str(masa), "--out", str(out)]) == 4
    assert not out.exists()
    assert "MissingFrobeniusEvidence" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["{not json", '{"name": "x"}', '{"name": "x", "coords": [], "metric": []}'])
def test_malformed_manifest_exit_2(tmp_path, capsys, text):
    m = tmp_path / "bad.json"
    m.write_text(text)
    out = tmp_path / "spec.csv"
    assert main(["eigs", "--manifest", str(m), "--n", "8,8", "--out", str(out)]) == 2
    assert list(tmp_path.iterdir()) == [m]
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("gft eigs:")


def test_missing_manifest_file_exit_2(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["eigs", "--manifest", str(tmp_path / "none.json"), "--n", "8,8", "--out", str(out)]) == 2
    assert not out.exists()


def test_validation_exit_2(tmp_path):
    assert main(["eigs", "--manifest", "Torus2", "--n", "8,8", "--k", "0"]) == 2
    assert main(["rayleigh", "--k", "1,2"]) == 2
    assert main(["torus-flow", "--slope", "0.5", "--wraps", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["eigs", "--manifest", "Torus2", "--n", "8,x"])
    with pytest.raises(ValidationError):
        RunConfig("eigs", cluster_tol=-1.0)
    with pytest.raises(ValidationError):
        RunConfig("bogus")


def test_byte_identical(tmp_path):
    for argv in (
        ["transform", "--manifest", "Sphere2", "--n", "16,32", "--k", "9"],
        ["masa", "--manifest", "Torus2", "--n", "12,12", "--k", "13"],
        ["rayleigh", "--k", "0.3,-1,2", "--lmax", "6"],
    ):
        a, b = tmp_path / "a.out", tmp_path / "b.out"
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes(), argv[0]


def test_transform(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["transform", "--manifest", "Torus2", "--n", "16,16", "--k", "13", "--joint", "--out", str(out)]) == 0
    meta, header, rows = _csv(out)
    assert header[0:2] == ["index", "lambda"] and header[-3:] == ["re", "im", "rho"]
    assert len(header) == 7 and len(rows) == 13
    assert float(meta["parseval_residual"]) <= 1e-12
    assert float(meta["reconstruction_error"]) <= 1e-12


def test_transform_input_vector(tmp_path):
    import numpy as np

    from gft.discretize import build_grid
    from gft.manifold import catalog

    g = build_grid(catalog("Circle"), (16,))
    vec = tmp_path / "psi.csv"
    np.savetxt(vec, np.column_stack([np.cos(g.nodes[:, 0]), np.zeros(16)]), delimiter=",")
    out = tmp_path / "c.csv"
    assert main(["transform", "--manifest", "Circle", "--n", "16", "--k", "16", "--input", str(vec), "--out", str(out)]) == 0
    assert float(_csv(out)[0]["parseval_residual"]) <= 1e-12
    bad = tmp_path / "short.csv"
    np.savetxt(bad, np.ones(5), delimiter=",")
    assert main(["transform", "--manifest", "Circle", "--n", "16", "--input", str(bad)]) == 2


def test_torus_flow(tmp_path):
    out = tmp_path / "orbit.csv"
    assert main(["torus-flow", "--slope", "0.75", "--wraps", "100", "--out", str(out)]) == 0
    meta, header, rows = _csv(out)
    assert header == ["t", "theta", "phi"]
    assert meta["closed"] == "true" and meta["winding"] == "3,4"
    assert main(["torus-flow", "--slope", str(2 ** -0.5), "--wraps", "4000", "--out", str(out)]) == 0
    assert _csv(out)[0]["closed"] == "false"


def test_rayleigh(tmp_path):
    out = tmp_path / "coeffs.csv"
    assert main(["rayleigh", "--k", "0,0,2.5", "--r", "1.0", "--lmax", "20", "--out", str(out)]) == 0
    meta, header, rows = _csv(out)
    assert header == ["ell", "m", "re", "im"]
    assert len(rows) == 21 * 21
    assert float(meta["parseval"]) == pytest.approx(1.0, abs=1e-6)


def test_killing_check(tmp_path):
    out = tmp_path / "k.json"
    assert main(["killing-check", "--manifest", "Sphere2", "--field", "K=dphi", "--field", "B=dth", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["fields"]["K"]["killing"] and not data["fields"]["B"]["killing"]
    assert data["robertson"]["separable"]
    assert main(["killing-check", "--manifest", "Box3", "--tensor", "T=1,1,1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["tensors"]["T"]["killing"]


def test_export(tmp_path):
    import scipy.io

    from gft.discretize import assemble_laplace_beltrami, build_grid
    from gft.manifold import catalog

    out = tmp_path / "lap.mtx"
    assert main(["export", "--manifest", "Sphere2", "--n", "14,8", "--out", str(out)]) == 0
    mat = scipy.io.mmread(str(out))
    ref = assemble_laplace_beltrami(build_grid(catalog("Sphere2"), (14, 8))).matrix
    assert abs(mat - ref).max() == 0
    assert (tmp_path / "lap.weights.csv").exists()


def test_report_command(tmp_path):
    out = tmp_path / "report.json"
    assert run(RunConfig("report", out_path=str(out))) == 0
    data = json.loads(out.read_text())
    assert data["format_version"] == 1
    assert data["cells"]["Ball3-spherical"] == "I-SD"


def test_config_from_args_defaults():
    cfg = config_from_args(build_parser().parse_args(["eigs", "--manifest", "Torus2", "--n", "8"]))
    assert cfg.seed == 42 and cfg.resolution == (8,) and cfg.spectral


def test_entry_point_subprocess(tmp_path):
    out = tmp_path / "spec.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "gft.cli", "eigs", "--manifest", "Circle", "--n", "16", "--k", "5", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert _csv(out)[0]["clusters"] == "0x1 1x2 4x2"


def test_numerical_failure_exit_3(tmp_path, capsys):
    # Circle gap 0 -> 1 sits inside the ambiguity band of tol 1
    out = tmp_path / "spec.csv"
    assert main(["eigs", "--manifest", "Circle", "--n", "16", "--k", "5", "--cluster-tol", "1.0", "--out", str(out)]) == 3
    assert not out.exists()
    assert "ClusterAmbiguity" in capsys.readouterr().err
