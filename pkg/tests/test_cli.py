"""CLI: config parsing, commands, outputs, manifests, reproducibility."""

import json
from pathlib import Path

import numpy as np
import pytest

from nllab.cli import main


def write_config(path: Path, text: str) -> str:
    path.write_text(text)
    return str(path)


AXES_COND = """
[measure]
kind = "axes"
d = 2
alpha = 1.0

[conditions]
rho_list = [0.25, 0.5, 1.0]
dh_list = [0.125, 0.0625]
delta = 0.5
lambda_budget = 20.0
"""

CAUCHY_SOLVE = """
[measure]
kind = "stable"
d = 1
alpha = 1.0
normalization = "symbol"

[grid]
h = 0.03125
box_radius = 8.0
domain_radius = 8.0

[solver]
dt = 0.0078125
tolerance = 1e-10

[solve]
t0 = 0.0
t1 = 0.5
initial = "hat"
exterior = "zero"
snapshot_times = [0.5]
"""

CONST_SOLVE = """
[measure]
kind = "stable"
d = 1
alpha = 1.2

[grid]
h = 0.125
box_radius = 2.0
domain_radius = 1.0

[solver]
dt = 0.125

[solve]
t0 = 0.0
t1 = 0.5
initial = "constant"
constant = 4.0
exterior = "constant"
exterior_constant = 4.0
snapshot_times = [0.5]
"""

SCALING_EXP = """
[measure]
kind = "stable"
d = 1
alpha = 1.0

[grid]
h = 0.0625

[solver]
dt = 0.0625

[experiment]
name = "scaling"
seed = 1
r = 1.0
"""


def test_version_command(capsys):
    assert main(["version"]) == 0
    assert "nllab" in capsys.readouterr().out


def test_check_conditions_axes(tmp_path):
    cfg = write_config(tmp_path / "c.toml", AXES_COND)
    out = tmp_path / "out"
    assert main(["check-conditions", cfg, "--out", str(out)]) == 0
    k1 = (out / "k1.csv").read_text().splitlines()
    assert k1[0] == "rho,value"
    for line in k1[1:]:
        assert float(line.split(",")[1]) == pytest.approx(8.0, rel=1e-12)
    summary = json.loads((out / "conditions_summary.json").read_text())
    assert summary["k1_lambda"] == pytest.approx(8.0)
    assert summary["passes"]["k1"] is True
    manifest = json.loads((out / "run.json").read_text())
    assert set(manifest["outputs"]) == {"k1.csv", "k2.csv", "k3.csv",
                                        "conditions_summary.json"}


def test_invalid_config_exit_code(tmp_path):
    bad = write_config(tmp_path / "bad.toml", """
[measure]
kind = "cusp"
d = 2
alpha = 0.5
s = 0.5
""")
    assert main(["check-conditions", bad, "--out", str(tmp_path / "o")]) == 2
    nonsense = write_config(tmp_path / "x.toml", "not toml [ ==")
    assert main(["solve", nonsense, "--out", str(tmp_path / "o2")]) == 2
    unknown = write_config(tmp_path / "u.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.0

[experiment]
name = "nonexistent"
seed = 3
""")
    assert main(["regularity", unknown, "--out", str(tmp_path / "o3")]) == 2


def test_solve_constant_snapshots(tmp_path):
    cfg = write_config(tmp_path / "c.toml", CONST_SOLVE)
    out = tmp_path / "out"
    assert main(["solve", cfg, "--out", str(out)]) == 0
    rows = (out / "snapshot_00004.csv").read_text().splitlines()
    assert rows[0] == "x,u"
    vals = np.array([float(r.split(",")[1]) for r in rows[1:]])
    np.testing.assert_allclose(vals, 4.0, rtol=1e-8)


def test_solve_cauchy_center_value(tmp_path):
    cfg = write_config(tmp_path / "c.toml", CAUCHY_SOLVE)
    out = tmp_path / "out"
    assert main(["solve", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "solve_summary.json").read_text())
    assert summary["final_center"] == pytest.approx(2.0 / np.pi, rel=0.05)


def test_scaling_identity_via_cli(tmp_path):
    cfg = write_config(tmp_path / "c.toml", SCALING_EXP)
    out = tmp_path / "out"
    assert main(["regularity", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "scaling.json").read_text())
    assert res["discrepancy"] == 0.0


def test_reproducibility_bit_identical(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.5

[grid]
h = 0.0625
box_radius = 8.0
domain_radius = 2.0

[solver]
dt = 0.0625

[experiment]
name = "harnack"
samples = 3
seed = 11
""")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["regularity", cfg, "--out", str(out1)]) == 0
    assert main(["regularity", cfg, "--out", str(out2)]) == 0
    for name in ("harnack.csv", "harnack.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_seed_override_changes_samples(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.5

[grid]
h = 0.0625
box_radius = 8.0
domain_radius = 2.0

[solver]
dt = 0.0625

[experiment]
name = "harnack"
samples = 2
seed = 11
""")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["regularity", cfg, "--out", str(out1)]) == 0
    assert main(["regularity", cfg, "--out", str(out2), "--seed", "12"]) == 0
    assert (out1 / "harnack.csv").read_bytes() \
        != (out2 / "harnack.csv").read_bytes()


def test_harnack_constant_smoke_column(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.0

[grid]
h = 0.0625
box_radius = 8.0
domain_radius = 2.0

[solver]
dt = 0.0625

[experiment]
name = "harnack"
samples = 1
seed = 2
include_constant_sample = true
""")
    out = tmp_path / "out"
    assert main(["regularity", cfg, "--out", str(out)]) == 0
    rows = (out / "harnack.csv").read_text().splitlines()
    assert rows[1].startswith("const,")
    assert float(rows[1].split(",")[1]) == pytest.approx(0.5, abs=1e-12)


def test_numerical_failure_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.0

[grid]
h = 0.125
box_radius = 2.0
domain_radius = 1.0

[solver]
dt = 0.125
tolerance = 1e-14
maxiter = 1

[solve]
t0 = 0.0
t1 = 0.5
initial = "bump"
""")
    assert main(["solve", cfg, "--out", str(tmp_path / "o")]) == 3


def test_threads_do_not_change_results(tmp_path):
    base = """
[measure]
kind = "stable"
d = 1
alpha = 1.5

[grid]
h = 0.0625
box_radius = 8.0
domain_radius = 2.0

[solver]
dt = 0.0625

[experiment]
name = "harnack"
samples = 4
seed = 11
"""
    cfg = write_config(tmp_path / "c.toml", base)
    o1, o2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["regularity", cfg, "--out", str(o1)]) == 0
    assert main(["regularity", cfg, "--out", str(o2), "--threads", "4"]) == 0
    assert (o1 / "harnack.csv").read_bytes() == (o2 / "harnack.csv").read_bytes()


def test_tabulated_kernel_from_config(tmp_path):
    table = tmp_path / "kernel.txt"
    table.write_text("# radius density\n0.01 1e4\n1.0 1.0\n100.0 1e-4\n")
    cfg = write_config(tmp_path / "c.toml", f"""
[measure]
kind = "tabulated"
d = 1
alpha = 1.0
table = "{table}"
head_exponent = -2.0
tail_exponent = -2.0

[conditions]
rho_list = [0.5, 1.0]
dh_list = [0.125]
delta = 0.5
""")
    out = tmp_path / "out"
    assert main(["check-conditions", cfg, "--out", str(out)]) == 0
    k1 = (out / "k1.csv").read_text().splitlines()
    vals = [float(line.split(",")[1]) for line in k1[1:]]
    assert all(v > 0 for v in vals)


REG_SMOKE = """
[measure]
kind = "stable"
d = 1
alpha = 1.5

[grid]
h = 0.125
box_radius = 8.0
domain_radius = 2.0

[solver]
dt = 0.125

[experiment]
name = "%s"
samples = 2
seed = 9
"""


@pytest.mark.parametrize("name,files", [
    ("hoelder", ["hoelder.json"]),
    ("poincare", ["poincare.csv", "poincare.json"]),
    ("loglemma", ["loglemma.csv", "loglemma.json"]),
    ("moser", ["moser.csv", "moser.json"]),
])
def test_regularity_smoke_paths(tmp_path, name, files):
    cfg = write_config(tmp_path / "c.toml", REG_SMOKE % name)
    out = tmp_path / "out"
    assert main(["regularity", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "run.json").read_text())
    for fname in files:
        assert (out / fname).exists()
        assert fname in manifest["outputs"]


def test_heatkernel_cli_with_box_doubling(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.0
normalization = "symbol"

[grid]
h = 0.0625
box_radius = 4.0
domain_radius = 4.0

[solver]
dt = 0.03125

[experiment]
name = "heatkernel"
seed = 1
t_list = [0.25, 0.5]
double_box = true
""")
    out = tmp_path / "out"
    assert main(["regularity", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "heatkernel.json").read_text())
    assert res["mass_drop_first_t"] < 0.03
    rows = (out / "heatkernel.csv").read_text().splitlines()
    assert rows[0] == "t,on_diag,far_min,far_max,mass"


def test_solve_axes_d2_smoke(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "axes"
d = 2
alpha = 1.0

[grid]
h = 0.25
box_radius = 2.0
domain_radius = 1.0

[solver]
dt = 0.25

[solve]
t0 = 0.0
t1 = 0.5
initial = "bump"
exterior = "zero"
snapshot_times = [0.5]
""")
    out = tmp_path / "out"
    assert main(["solve", cfg, "--out", str(out)]) == 0
    rows = (out / "snapshot_00002.csv").read_text().splitlines()
    assert rows[0] == "x1,x2,u"


def test_k2_identity_summary_via_cli(tmp_path):
    cfg = write_config(tmp_path / "c.toml", """
[measure]
kind = "stable"
d = 1
alpha = 1.5
normalization = "robust"

[conditions]
rho_list = [0.5, 1.0]
dh_list = [0.125]
delta = 0.5
""")
    out = tmp_path / "out"
    assert main(["check-conditions", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "conditions_summary.json").read_text())
    assert summary["k2_lambda"] == pytest.approx(1.0, abs=1e-9)
