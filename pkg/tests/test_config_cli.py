import numpy as np
import pytest

from pcompliance import cli, reporting
from pcompliance.config import ExperimentConfig, config_from_text, load_config
from pcompliance.errors import ConfigError


def write_config(tmp_path, text):
    path = tmp_path / "experiment.ini"
    path.write_text(text)
    return str(path)


def test_empty_config_gives_defaults():
    cfg = config_from_text("")
    assert cfg == ExperimentConfig()
    assert cfg.problem.p == 2.0
    assert cfg.solve.nodes_per_side == 129


def test_config_round_trip_of_values():
    cfg = config_from_text("""
[problem]
p = 1.5
dim = 3
half_width = 2.0
length_penalty = 0.5
length_budget =

[solver]
grad_tolerance = 1e-6
method = descent
prefer_direct = yes

[capacity-sweep]
lengths = 0.1, 0.2 0.4
resolution = 2

[sweep-vanishing]
n_list = 1 2 4
compare_baseline = off

[output]
seed = 11
directory = results
""")
    assert cfg.problem.p == 1.5
    assert cfg.problem.dim == 3
    assert cfg.problem.length_budget is None
    assert cfg.solver.grad_tolerance == 1e-6
    assert cfg.solver.method == "descent"
    assert cfg.solver.prefer_direct is True
    assert cfg.capacity_sweep.lengths == (0.1, 0.2, 0.4)
    assert cfg.capacity_sweep.resolution == 2
    assert cfg.sweep_vanishing.n_list == (1, 2, 4)
    assert cfg.sweep_vanishing.compare_baseline is False
    assert cfg.seed == 11
    assert cfg.out_dir == "results"


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        config_from_text("[solvers]\ngrad_tolerance = 1e-6\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_text("[problem]\nexponent = 2\n")
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_text("[output]\nfolder = x\n")


def test_bad_values_carry_section_context():
    with pytest.raises(ConfigError, match=r"\[problem\]"):
        config_from_text("[problem]\np = two\n")
    # parses as a float but fails dataclass validation
    with pytest.raises(ConfigError, match=r"\[problem\]"):
        config_from_text("[problem]\np = 1.0\n")
    with pytest.raises(ConfigError, match=r"\[solver\]"):
        config_from_text("[solver]\nmethod = newton\n")
    with pytest.raises(ConfigError, match=r"\[solver\]"):
        config_from_text("[solver]\nprefer_direct = maybe\n")


def test_malformed_ini_reports_origin():
    with pytest.raises(ConfigError, match="badfile.ini"):
        config_from_text("p = 2 without a section\n", origin="badfile.ini")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_format_value_stability():
    assert reporting.format_value(True) == "1"
    assert reporting.format_value(False) == "0"
    assert reporting.format_value(3) == "3"
    assert reporting.format_value(0.1) == "0.1"
    assert reporting.format_value(float("nan")) == "nan"
    assert reporting.format_value(float("inf")) == "inf"
    assert reporting.format_value(np.float64(0.25)) == "0.25"


def test_write_csv_layout(tmp_path):
    path = reporting.write_csv(tmp_path / "t.csv", ("a", "b"),
                               [(1, 2.5), (3, float("nan"))],
                               seed=9, comments=("note=x",))
    lines = path.read_text().splitlines()
    assert lines[0] == "# schema=1"
    assert lines[1] == "# seed=9"
    assert lines[2] == "# note=x"
    assert lines[3] == "a,b"
    assert lines[4] == "1,2.5"
    assert lines[5] == "3,nan"


def test_cli_solve_writes_reports(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[solve]
nodes_per_side = 33
source = bump
heatmap = true
""")
    out = tmp_path / "run"
    code = cli.main(["solve", "--config", cfg, "--out", str(out), "--seed", "7"])
    assert code == 0
    assert (out / "solve.csv").is_file()
    assert (out / "solution.csv").is_file()
    svg = (out / "solution.svg").read_text()
    assert svg.startswith("<svg")
    assert "# seed=7" in (out / "solve.csv").read_text()
    assert "compliance" in capsys.readouterr().out


def test_cli_solve_missing_cracks_file(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[solve]
nodes_per_side = 17
cracks_file = /nonexistent/cracks.txt
""")
    code = cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_cli_bad_config_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "[nonsense]\nkey = 1\n")
    code = cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 2
    assert "unknown section" in capsys.readouterr().err


def test_cli_nonconvergence_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[problem]
p = 3.0

[solver]
max_iterations = 2
grad_tolerance = 1e-12

[solve]
nodes_per_side = 17
source = bump
""")
    code = cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_cli_capacity_sweep_above_dim_no_band(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[problem]
p = 3.0

[capacity-sweep]
lengths = 0.1 0.2 0.4
resolution = 2

[solver]
grad_tolerance = 1e-6
""")
    out = tmp_path / "caps"
    code = cli.main(["capacity-sweep", "--config", cfg, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "p above dim" in captured.out
    text = (out / "capacity_sweep.csv").read_text()
    assert text.splitlines()[2] == "p,dim,t,h,box_half_width,capacity"
    assert len(text.splitlines()) == 6


def test_cli_capacity_sweep_failed_check_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[problem]
p = 1.5

[capacity-sweep]
lengths = 0.1 0.2 0.4
resolution = 2
slope_tolerance = 1e-9

[solver]
grad_tolerance = 1e-6
""")
    code = cli.main(["capacity-sweep", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, """
[capacity-sweep]
lengths = 0.1 0.2 0.4
resolution = 2
""")
    out = tmp_path / "repeat"
    assert cli.main(["capacity-sweep", "--config", cfg, "--out", str(out)]) in (0, 1)
    first = (out / "capacity_sweep.csv").read_bytes()
    assert cli.main(["capacity-sweep", "--config", cfg, "--out", str(out)]) in (0, 1)
    assert (out / "capacity_sweep.csv").read_bytes() == first


def test_cli_poincare_empty_sweep(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[poincare]
deltas =
""")
    code = cli.main(["poincare", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 0
    assert "empty sweep" in capsys.readouterr().out


def test_cli_poincare_doubling_check(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[poincare]
deltas = 0.5 1.0
relative_lengths = 0.25 0.5
nodes_per_side = 17
capacity_resolution = 4
""")
    out = tmp_path / "poin"
    code = cli.main(["poincare", "--config", cfg, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "doubling" in captured.out
    assert "ok" in captured.out
    rows = (out / "poincare.csv").read_text().splitlines()
    assert rows[2] == "p,delta,a,h,constant,capacity"
    # schema + seed + header + 2 lengths x 2 deltas
    assert len(rows) == 7


def test_cli_stability_no_pairs(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[stability]
pairs = 0
""")
    code = cli.main(["stability", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 0
    assert "empty sweep" in capsys.readouterr().out


def test_cli_stability_small_run(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[stability]
pairs = 4
calibration = 2
nodes_per_side = 33
truncation_levels = 10 20 50
""")
    out = tmp_path / "stab"
    code = cli.main(["stability", "--config", cfg, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "violations on holdout: 0" in captured.out
    assert (out / "stability.csv").is_file()
    assert (out / "truncation.csv").is_file()


def test_cli_sweep_vanishing_small_run(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[sweep-vanishing]
n_list = 1 2 4
local_nodes = 33
epsilon = 0.25
baseline_nodes = 65
""")
    out = tmp_path / "van"
    code = cli.main(["sweep-vanishing", "--config", cfg, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "check crack length identity: ok" in captured.out
    assert "check flux strictly decreasing: ok" in captured.out
    assert "check crack grid beats connected baseline: ok" in captured.out
    text = (out / "vanishing.csv").read_text()
    assert "# tilde_c=" in text
    assert "# bound_safety=" in text
