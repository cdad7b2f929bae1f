import json
import math

import numpy as np
import pytest

from coagfrag.cli import main
from coagfrag.config import ConfigError, ConfigParseError, parse_config
from coagfrag.errors import DimensionMismatch
from coagfrag.io import CSV_HEADER, SCHEMA, read_solution_csv, solution_csv
from coagfrag.operators import DistributionState
from coagfrag.sizegrid import build_geometric_grid

MINIMAL = """
rho = 1.0
grid.x_min = 1e-6
grid.x_max = 1e3
grid.n_cells = 180
coagulation.alpha = 0.0
coagulation.beta = 0.0
fragmentation.gamma = 1.0
"""

# coarse and quick, used where only the plumbing matters
SMALL = """
rho = 1.0
grid.x_min = 1e-4
grid.x_max = 1e2
grid.n_cells = 60
coagulation.alpha = 0.0
coagulation.beta = 0.0
fragmentation.gamma = 1.0
[[schedule]]
epsilon = 0.01
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.coagulation.K0 == 1.0
    assert cfg.fragmentation.a0 == 1.0
    assert cfg.fragmentation.daughter.kind == "power"
    assert cfg.fragmentation.daughter.nu == 0.0
    assert [s.epsilon for s in cfg.schedule.stages] == [0.1, 0.03, 0.01, 0.003, 0.001]
    assert all(s.j == math.inf for s in cfg.schedule.stages)
    assert cfg.csv_path is None and cfg.json_path is None
    assert cfg.grid.build().n_cells == 180


@pytest.mark.parametrize(
    "patch,key,msg",
    [
        ("coagulation.alpha = 0.6\ncoagulation.beta = 0.6", "coagulation", "alpha+beta must lie in [0,1)"),
        ("fragmentation.gamma = 0.0", "fragmentation.gamma", "gamma > 0 required"),
        ("grid.n_cells = 1", "grid", "n_cells"),
        ("rho = -1.0", "rho", "positive"),
        ("coagulation.gamma = 1.0", "coagulation.gamma", "unknown key"),
        ("fragmentation.daughter.kind = \"cubic\"", "fragmentation.daughter.kind", "one of"),
        ("fragmentation.daughter.nu = -2.0", "fragmentation.daughter", "nu"),
        ("evolve.tol_steady = 2.0", "evolve", "tol_steady"),
        ("evolve.bogus = 1", "evolve.bogus", "unknown key"),
    ],
)
def test_validation_errors_name_key(patch, key, msg):
    lines = [ln for ln in MINIMAL.splitlines()
             if ln.split("=")[0].strip() not in {p.split("=")[0].strip() for p in patch.splitlines()}]
    with pytest.raises(ConfigError) as exc:
        parse_config("\n".join(lines) + "\n" + patch + "\n")
    assert exc.value.key.startswith(key)
    assert msg in str(exc.value)


def test_missing_required_key():
    text = MINIMAL.replace("fragmentation.gamma = 1.0", "")
    with pytest.raises(ConfigError, match="fragmentation.gamma"):
        parse_config(text)


def test_parse_error_has_line_info():
    with pytest.raises(ConfigParseError, match="line 3"):
        parse_config("rho = 1.0\ngrid.x_min = 1e-6\ngrid.x_max = = 3\n")


def test_schedule_and_overrides():
    cfg = parse_config(MINIMAL + """
evolve.max_steps = 500
[[schedule]]
epsilon = 0.1
j = 100.0
[[schedule]]
epsilon = 0.0
j = "inf"
tol_steady = 1e-9
""")
    st = cfg.schedule.stages
    assert (st[0].epsilon, st[0].j) == (0.1, 100.0)
    assert st[1].j == math.inf and st[1].overrides == {"tol_steady": 1e-9}
    assert cfg.evolve.max_steps == 500


def test_bad_schedule_order():
    with pytest.raises(ConfigError, match="schedule"):
        parse_config(MINIMAL + "[[schedule]]\nepsilon = 0.01\n[[schedule]]\nepsilon = 0.1\n")


def test_tabulated_daughter(tmp_path):
    z = np.logspace(-6, 0, 120)
    # constant B is reproduced exactly by interpolation in log z
    np.savetxt(tmp_path / "b.csv", np.c_[z, np.full_like(z, 2.0)], delimiter=",", header="z,B")
    p = write(tmp_path, MINIMAL + 'fragmentation.daughter.kind = "tabulated"\n'
                                   'fragmentation.daughter.table = "b.csv"\n')
    from coagfrag.config import load_config

    cfg = load_config(p)
    d = cfg.fragmentation.daughter
    assert d.kind == "tabulated"
    assert d.values[-1] == 2.0
    bad = write(tmp_path, MINIMAL + 'fragmentation.daughter.kind = "tabulated"\n'
                                     'fragmentation.daughter.table = "missing.csv"\n', "bad.toml")
    with pytest.raises(ConfigError, match="fragmentation.daughter.table"):
        load_config(bad)
    assert cfg.to_dict()["fragmentation"]["daughter"]["kind"] == "tabulated"


def test_verify_section():
    cfg = parse_config(MINIMAL + """
verify.moments = [0.25, 1.0]
verify.lp = [[0.0, 2.0], [1.0, 1.5]]
verify.exponent_decades = 3
[[verify.test_functions]]
kind = "capped_linear"
R = 2.0
[[verify.test_functions]]
kind = "exponential"
s = 0.5
""")
    assert cfg.verify.moments == (0.25, 1.0)
    assert cfg.verify.lp == ((0.0, 2.0), (1.0, 1.5))
    assert [t.label for t in cfg.verify.test_functions] == ["min(x,2)", "exp(s=0.5)"]
    with pytest.raises(ConfigError, match="verify.lp"):
        parse_config(MINIMAL + "verify.lp = [[0.0, 0.5]]\n")


def test_csv_round_trip_is_exact(tmp_path):
    g = build_geometric_grid(1e-6, 1e3, 50)
    rng = np.random.default_rng(3)
    s = DistributionState(g, rng.random(50) * 10.0 ** rng.uniform(-300, 300, 50))
    text = solution_csv(s)
    assert text.startswith(CSV_HEADER + "\n") and "\r" not in text
    p = tmp_path / "s.csv"
    p.write_text(text)
    back = read_solution_csv(p, g)
    np.testing.assert_array_equal(back.f, s.f)
    with pytest.raises(DimensionMismatch):
        read_solution_csv(p, build_geometric_grid(1e-6, 1e3, 51))
    with pytest.raises(DimensionMismatch):
        read_solution_csv(p, build_geometric_grid(1e-5, 1e3, 50))


def test_solve_writes_outputs(tmp_path):
    cfg = write(tmp_path, SMALL)
    csv, js = tmp_path / "out.csv", tmp_path / "out.json"
    assert main(["solve", str(cfg), "--csv", str(csv), "--json", str(js)]) == 0
    rep = json.loads(js.read_text())
    assert rep["schema"] == SCHEMA and rep["converged"] is True
    assert "wall_clock_seconds" not in rep
    assert rep["config"]["schedule"] == [{"epsilon": 0.01, "j": "inf"}]
    assert set(rep["final"]) >= {"weak_form", "exponent_fit", "predicted_tau", "moments"}
    assert rep["final"]["predicted_tau"] == 0.0
    lines = csv.read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 61
    assert float(lines[-1].split(",")[2]) == pytest.approx(1.0, rel=1e-9)


def test_solve_wall_clock_is_opt_in(tmp_path):
    cfg = write(tmp_path, SMALL)
    js = tmp_path / "w.json"
    assert main(["solve", str(cfg), "--json", str(js), "--wall-clock"]) == 0
    assert json.loads(js.read_text())["wall_clock_seconds"] >= 0


def test_solve_not_converged_exit_code(tmp_path):
    cfg = write(tmp_path, SMALL + "max_steps = 1\n")
    js = tmp_path / "r.json"
    assert main(["solve", str(cfg), "--json", str(js)]) == 2
    assert json.loads(js.read_text())["converged"] is False


def test_solve_unwritable_output(tmp_path):
    cfg = write(tmp_path, SMALL)
    bad = tmp_path / "missing" / "dir" / "r.json"
    assert main(["solve", str(cfg), "--json", str(bad)]) == 1


def test_bad_config_exit_code(tmp_path, caplog):
    cfg = write(tmp_path, SMALL.replace("fragmentation.gamma = 1.0", "fragmentation.gamma = 0"))
    assert main(["solve", str(cfg)]) == 1
    assert "gamma > 0 required" in caplog.text
    assert main(["solve", str(tmp_path / "nope.toml")]) == 1


def test_verify_reproduces_solve(tmp_path, config_dir):
    cfg = str(config_dir / "constant_kernel.toml")
    csv, js, vj = tmp_path / "s.csv", tmp_path / "s.json", tmp_path / "v.json"
    assert main(["solve", cfg, "--csv", str(csv), "--json", str(js)]) == 0
    assert main(["verify", str(csv), cfg, "--json", str(vj)]) == 0
    solved = json.loads(js.read_text())["final"]
    verified = json.loads(vj.read_text())["final"]
    assert json.dumps(solved, sort_keys=True) == json.dumps(verified, sort_keys=True)


def test_verify_analytic_profile(tmp_path, config_dir):
    g = build_geometric_grid(1e-6, 1e3, 180)
    csv = tmp_path / "exp.csv"
    csv.write_text(solution_csv(DistributionState(g, np.exp(-g.pivots))))
    out = tmp_path / "v.json"
    assert main(["verify", str(csv), str(config_dir / "constant_kernel.toml"),
                 "--json", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["final"]["weak_form_max_residual"] <= 1e-2


def test_verify_row_count_mismatch(tmp_path, config_dir, caplog):
    g = build_geometric_grid(1e-6, 1e3, 90)
    csv = tmp_path / "short.csv"
    csv.write_text(solution_csv(DistributionState(g, np.exp(-g.pivots))))
    assert main(["verify", str(csv), str(config_dir / "constant_kernel.toml")]) == 1
    assert "90 rows" in caplog.text


def test_oracle_bernstein(tmp_path):
    out, summ = tmp_path / "b.csv", tmp_path / "b.json"
    assert main(["oracle", "bernstein", "--out", str(out), "--summary", str(summ)]) == 0
    s = json.loads(summ.read_text())
    assert s["max_residual"] <= 1e-6
    assert s["slope_at_zero"] == pytest.approx(1.0, abs=1e-3)
    rows = out.read_text().splitlines()
    assert rows[0] == "s,U,residual" and len(rows) == 401


def test_oracle_constant_kernel(tmp_path, capsys):
    out = tmp_path / "q.csv"
    assert main(["oracle", "constant-kernel", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert summary["z"] == pytest.approx(0.36787944117144233, rel=1e-15)
    x, phi = np.loadtxt(out, delimiter=",", skiprows=1, unpack=True)
    np.testing.assert_allclose(phi, np.exp(-x), rtol=1e-15)


def test_oracle_unknown_name():
    with pytest.raises(SystemExit) as exc:
        main(["oracle", "smoluchowski"])
    assert exc.value.code == 2
