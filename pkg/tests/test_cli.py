import math

import numpy as np
import pytest

from funcsol.cli import main, read_field_csv, write_field_csv
from funcsol.config import load_config
from funcsol.errors import ConfigError, UnknownVariableError
from funcsol.geometry import build_rectangle

MOLECULAR_CFG = """
[geometry]
family = rectangle
n1 = 17
n2 = 17
width = 1.0
height = 1.0

[problem]
mode = molecular
n = 2
a11 = 1+u1
a12 = 0
a21 = 0
a22 = 1
u_star = 1 0
p_star = 1.0

[solver]
backend = fixed_point
n_nodes = 257
tol = 1e-10

[output]
directory = {out}
"""

EQUAL_COEFF_CFG = """
[geometry]
family = rectangle
n1 = 17
n2 = 17
width = 1.0
height = 1.0

[problem]
mode = scalar
n = 1
a11 = 1+u1^2+p^2
b1 = 1+u1^2+p^2
u_star = 2
p_star = 1.0

[solver]
backend = scalar_bisection
n_nodes = 2049
tol = 1e-11
r_integral = 1.0
q_integral = 1.0

[output]
directory = {out}
"""


def write_cfg(tmp_path, text, name="case.ini"):
    path = tmp_path / name
    path.write_text(text.format(out=tmp_path / "out"))
    return path


def test_load_config_molecular(tmp_path):
    cfg = load_config(write_cfg(tmp_path, MOLECULAR_CFG))
    assert cfg.spec.mode == "molecular"
    assert cfg.spec.n == 2
    assert cfg.backend == "fixed_point"
    assert cfg.n_nodes == 257


def test_config_backend_mode_mismatch(tmp_path):
    bad = MOLECULAR_CFG.replace("backend = fixed_point", "backend = scalar_bisection")
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, bad))


def test_config_unknown_variable(tmp_path):
    bad = MOLECULAR_CFG.replace("a11 = 1+u1", "a11 = 1+u3")
    with pytest.raises(UnknownVariableError):
        load_config(write_cfg(tmp_path, bad))


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_config_missing_section(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("[geometry]\nfamily = rectangle\nn1 = 5\nn2 = 5\nwidth = 1\nheight = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_csv_round_trip(tmp_path):
    grid = build_rectangle(5, 4, 1.0, 2.0)
    values = np.arange(20, dtype=float).reshape(5, 4) / 7.0
    path = tmp_path / "f.csv"
    write_field_csv(path, grid, values)
    first = path.read_text().splitlines()
    assert first[0] == "x1,x2,value"
    assert len(first) == 21
    back = read_field_csv(path, grid)
    np.testing.assert_array_equal(back, values)


def test_solve_molecular_end_to_end(tmp_path):
    cfg_path = write_cfg(tmp_path, MOLECULAR_CFG)
    assert main(["solve", str(cfg_path)]) == 0
    out = tmp_path / "out"
    for name in ("z.csv", "u1.csv", "u2.csv", "report.txt"):
        assert (out / name).is_file()
    report = (out / "report.txt").read_text()
    assert "gamma = " in report
    assert "theta_deviation = " in report
    gamma1 = float(report.split("gamma = ")[1].split()[0])
    assert gamma1 == pytest.approx(1.5, abs=1e-7)


def test_solve_equal_coeff_fields_satisfy_rule(tmp_path):
    cfg_path = write_cfg(tmp_path, EQUAL_COEFF_CFG)
    assert main(["solve", str(cfg_path)]) == 0
    cfg = load_config(cfg_path)
    grid = cfg.make_grid()
    out = tmp_path / "out"
    u = read_field_csv(out / "u1.csv", grid)
    p = read_field_csv(out / "p.csv", grid)
    assert np.max(np.abs(u - 2.0 * p)) <= 1e-6


def test_pivot_command(tmp_path):
    cfg_path = write_cfg(tmp_path, MOLECULAR_CFG)
    assert main(["pivot", str(cfg_path)]) == 0
    assert (tmp_path / "out" / "z.csv").is_file()
    assert not (tmp_path / "out" / "u1.csv").exists()


def test_verify_command(tmp_path):
    cfg_path = write_cfg(tmp_path, MOLECULAR_CFG)
    main(["solve", str(cfg_path)])
    assert main(["verify", str(cfg_path), str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "verify_report.txt").is_file()


def test_verify_residual_limit_failure(tmp_path):
    strict = MOLECULAR_CFG + "residual_limit = 1e-12\n"
    cfg_path = write_cfg(tmp_path, strict)
    main(["solve", str(cfg_path)])
    # composed nonlinear fields carry an O(h^2) defect, far above 1e-12
    assert main(["verify", str(cfg_path), str(tmp_path / "out")]) == 3


def test_solve_resonant_exit_code(tmp_path):
    cfg = """
[geometry]
family = rectangle
n1 = 9
n2 = 9
width = 1.0
height = 1.0

[problem]
mode = darcy
n = 2
a11 = 1
a12 = 0
a21 = 0
a22 = 1
b1 = -u2
b2 = u1
b_next = 1
u_star = 0 0
p_star = {twopi}

[solver]
backend = shooting
n_nodes = 257

[output]
directory = {out}
""".format(twopi=2 * math.pi, out=tmp_path / "out")
    path = tmp_path / "resonant.ini"
    path.write_text(cfg)
    assert main(["solve", str(path)]) == 4


def test_config_error_exit_code(tmp_path):
    assert main(["solve", str(tmp_path / "missing.ini")]) == 1


def test_oracle_grid_too_small_exit_code(tmp_path):
    assert main(["oracle", "--grid", "16", "--out", str(tmp_path / "o")]) == 1


def test_output_dir_env_override(tmp_path, monkeypatch):
    cfg_path = write_cfg(tmp_path, MOLECULAR_CFG)
    target = tmp_path / "env_out"
    monkeypatch.setenv("FUNCSOL_OUTPUT_DIR", str(target))
    assert main(["pivot", str(cfg_path)]) == 0
    assert (target / "z.csv").is_file()
    assert not (tmp_path / "out").exists()


def test_solve_determinism(tmp_path):
    cfg_path = write_cfg(tmp_path, MOLECULAR_CFG)
    main(["solve", str(cfg_path), "--out", str(tmp_path / "a")])
    main(["solve", str(cfg_path), "--out", str(tmp_path / "b")])
    for name in ("z.csv", "u1.csv", "u2.csv", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
