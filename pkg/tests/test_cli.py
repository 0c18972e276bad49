from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glduality.cli import (
    EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, ConfigError, builtin_envelope,
    export_slice, export_vtk, load_config, main, parse_config, read_slice, serialize,
)
from glduality.grid import BoxGrid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_GL = """
[run]
model = gl3d
[grid]
cells = 3
pad = 1
[params]
tol = 1e-9
{extra}
[field]
B0 = 0.031
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_shipped_configs_parse():
    cfg = load_config(CONFIGS / "paper_b008.ini")
    p = cfg.params
    assert cfg.B0 == 0.008 and (p.gamma, p.alpha, p.beta, p.K0, p.rho) == (1, 1, 1, 1, 1)
    assert cfg.cells == 16 and cfg.pad == 4 and cfg.sweep_B0 == (0.008, 0.031)
    assert load_config(CONFIGS / "paper_b031.ini").B0 == 0.031
    assert load_config(CONFIGS / "scalar_demo.ini").model == "scalar1d"


def test_empty_file_is_rejected():
    with pytest.raises(ConfigError, match="model is required"):
        parse_config("")


def test_every_problem_is_reported_with_its_line():
    text = "[run]\nmodel = gl3d\ncolour = red\n[params]\ngamma = abc\n[grid]\ncells = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    msgs = exc.value.problems
    assert any(m.startswith("line 3:") and "colour" in m for m in msgs)
    assert any(m.startswith("line 5:") and "gamma" in m for m in msgs)
    assert any(m.startswith("line 7:") and "cells" in m for m in msgs)


def test_constraint_violations():
    with pytest.raises(ConfigError, match="positive"):
        parse_config("[run]\nmodel = gl3d\n[params]\nalpha = -1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[run]\nmodel = gl3d\n[extras]\n")
    with pytest.raises(ConfigError, match="must be one of"):
        parse_config("[run]\nmodel = gl2d\n")


def test_round_trip_shipped():
    for name in ("paper_b008.ini", "paper_b031.ini", "scalar_demo.ini"):
        cfg = load_config(CONFIGS / name)
        assert parse_config(serialize(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["gl3d", "scalar1d", "scalar2d"]),
    st.floats(0.01, 10, allow_nan=False),
    st.one_of(st.none(), st.floats(1, 100)),
    st.lists(st.floats(0, 1, allow_nan=False), max_size=4),
    st.integers(0, 2),
    st.booleans(),
)
def test_round_trip_property(model, gamma, K, sweep, axis, refine):
    text = (f"[run]\nmodel = {model}\naxis = {axis}\nrefine = {refine}\n"
            f"[params]\ngamma = {gamma!r}\nK = {K!r}\n[sweep]\nB0 = {', '.join(map(repr, sweep))}\n")
    text = text.replace("K = None", "K = auto")
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg


def test_builtin_envelopes():
    env = builtin_envelope("paper-envelope")
    assert env(0.0, 0.0, 0.0) == pytest.approx(27 / 512, abs=1e-15)
    assert env(1.5, 0.2, -0.3) == 0.0 and env(0.1, -1.5, 0.0) == 0.0
    assert np.all(builtin_envelope("zero")(np.ones(3), np.ones(3), np.ones(3)) == 0)
    assert np.all(builtin_envelope("uniform")(np.ones(3), np.ones(3), np.ones(3)) == 1)
    with pytest.raises(ValueError):
        builtin_envelope("gaussian")


def test_csv_round_trip_is_exact(tmp_path, rng):
    g = BoxGrid.cube(0.5, 4)
    v = rng.standard_normal(g.shape)
    rows = read_slice(export_slice(v, g, tmp_path / "s.csv", axis=2, coordinate=0.01))
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "x,y,value"
    assert np.array_equal(rows[:, 2], v[:, :, 2].ravel())
    const = read_slice(export_slice(np.full(g.shape, 0.25), g, tmp_path / "c.csv"))
    assert np.all(const[:, 2] == 0.25)


def test_vtk_layout(tmp_path):
    g = BoxGrid.cube(0.5, 2)
    v = np.arange(27, dtype=float).reshape(g.shape)
    lines = export_vtk(v, g, tmp_path / "f.vtk").read_text().splitlines()
    assert lines[3] == "DATASET STRUCTURED_POINTS" and lines[4] == "DIMENSIONS 3 3 3"
    data = np.array(lines[10:], dtype=float)
    # x fastest: second value steps along x
    assert data[1] == v[1, 0, 0] and data[3] == v[0, 1, 0] and data[9] == v[0, 0, 1]


def test_exit_code_bad_config(tmp_path, capsys):
    assert main(["solve", "--config", write(tmp_path, "[run]\n")]) == EXIT_CONFIG
    assert "model is required" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


def test_scalar_certify(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["certify", "--config", str(CONFIGS / "scalar_demo.ini"), "--out", str(out)])
    assert rc == EXIT_OK
    rep = dict(l.split(" = ", 1) for l in (out / "certificate.txt").read_text().splitlines())
    assert float(rep["gap"]) <= 1e-8
    assert "gap =" in capsys.readouterr().out


def test_gl_solve_writes_slice(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", write(tmp_path, SMALL_GL.format(extra="")), "--out", str(out)]) == EXIT_OK
    rows = read_slice(out / "phi2_z0.csv")
    assert rows.shape == (16, 3) and np.all(rows[:, 2] <= 1 + 1e-6)
    assert "reason = tolerance-met" in (out / "report.txt").read_text()


def test_gl_export_and_certify(tmp_path):
    cfg = write(tmp_path, SMALL_GL.format(extra=""))
    assert main(["export", "--config", cfg, "--out", str(tmp_path / "e")]) == EXIT_OK
    assert (tmp_path / "e" / "phi2.vtk").exists()
    assert main(["certify", "--config", cfg, "--out", str(tmp_path / "c")]) == EXIT_OK
    assert (tmp_path / "c" / "certificate.txt").exists()


def test_exit_code_not_converged(tmp_path):
    cfg = write(tmp_path, SMALL_GL.format(extra="max_iter = 1\ntol = 1e-14").replace("tol = 1e-9\n", ""))
    text = Path(cfg).read_text().replace("[run]\n", "[run]\nrefine = false\n")
    Path(cfg).write_text(text)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_NOT_CONVERGED


def test_exit_code_certificate_precondition(tmp_path):
    cfg = write(tmp_path, SMALL_GL.format(extra="K2 = 0.5"))
    assert main(["certify", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CERTIFICATE


def test_sweep_table(tmp_path):
    text = SMALL_GL.format(extra="") + "[sweep]\nB0 = 0.008, 0.031\n"
    out = tmp_path / "o"
    assert main(["sweep", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "B0,mean_phi2,reason" and len(lines) == 3
    assert (out / "B0_0.008" / "phi2_z0.csv").exists() and (out / "B0_0.031" / "phi2_z0.csv").exists()
    m = [float(l.split(",")[1]) for l in lines[1:]]
    assert m[1] < m[0]


def test_seed_reproducibility(tmp_path):
    cfg = write(tmp_path, SMALL_GL.format(extra="").replace("[run]\n", "[run]\nstart = random\nnoise = 0.05\n"))
    for d in ("a", "b"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / d), "--seed", "5"]) == EXIT_OK
    a = (tmp_path / "a" / "phi2_z0.csv").read_text()
    assert a == (tmp_path / "b" / "phi2_z0.csv").read_text()
