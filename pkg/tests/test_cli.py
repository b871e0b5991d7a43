import subprocess
import sys

import pytest

from crgame.cli import run, signal_profiles
from golden import AVAIL_R0, POOL_R04, expected_csv

DEVIATION = """\
game: {mirrored: {customers: 3, p: 0.9, r: 0.4}}
experiment:
  trials: 2000
  seed: 12
  deviation: {customer: 2, p_mis: [0, 1]}
"""

SWEEP = """\
game: {mirrored: {customers: 3, p: 0.9, r: 0.4}}
experiment:
  p: [0.55, 0.95]
  r: [0.1, 0.9]
"""


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="game.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_solve_perfect_builtin(capsys):
    code, out, _ = invoke(capsys, "solve-perfect")
    assert code == 0
    assert out.splitlines() == ["kind,values", "grouping,2,1", "actions,1,1,2", "utilities,50,50,40"]


def test_solve_perfect_single_customer(capsys):
    code, out, _ = invoke(capsys, "solve-perfect", "--customers", "1", "--state", "2")
    assert code == 0
    assert "grouping,0,1" in out.splitlines()


def test_solve_bayes_single_customer(capsys):
    code, out, _ = invoke(capsys, "solve-bayes", "--customers", "1")
    assert code == 0
    assert out.splitlines() == ["customer,expected_utility,stderr,method", "1,94,0,exact"]


@pytest.mark.parametrize("table, r", [(POOL_R04, "0.4"), (AVAIL_R0, "0")])
def test_best_response_table_matches_reference_rows(capsys, table, r):
    p = ",".join(str(x) for x in table["p"])
    code, out, _ = invoke(capsys, "best-response-table", "--r", r, "--p", p, "--paper-row-order")
    assert code == 0
    assert out == expected_csv(table)


def test_best_response_table_default_order_is_lexicographic(capsys):
    code, out, _ = invoke(capsys, "best-response-table", "--p", "0.9")
    rows = out.splitlines()
    assert rows[1].startswith("0.9,1,1,1,")
    assert rows[-1].startswith("0.9,2,2,2,")
    assert len(rows) == 9


def test_best_response_table_single_customer(capsys):
    code, out, _ = invoke(capsys, "best-response-table", "--customers", "1", "--p", "0.9")
    assert out.splitlines() == ["p,s_1,x_1", "0.9,1,1", "0.9,2,2"]


def test_signal_profile_orders():
    assert list(signal_profiles(2, 2)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert list(signal_profiles(2, 2, reference_order=True)) == [(1, 1), (0, 1), (1, 0), (0, 0)]


def test_deviation_schema(capsys, tmp_path):
    code, out, _ = invoke(capsys, "experiment", "--config", write(tmp_path, DEVIATION))
    rows = out.splitlines()
    assert code == 0
    assert rows[0] == "p,p_mis,customer,mean,stderr"
    assert len(rows) == 1 + 2 * 3
    assert rows[1].startswith("0.9,0,1,")


def test_sweep_schema_and_anchors(capsys, tmp_path):
    code, out, _ = invoke(capsys, "experiment", "--config", write(tmp_path, SWEEP))
    rows = [r.split(",") for r in out.splitlines()]
    assert code == 0
    assert rows[0] == ["p", "r", "argmax_customer", "mean_1", "mean_2", "mean_3"]
    cells = {(r[0], r[1]): r[2] for r in rows[1:]}
    assert cells[("0.95", "0.1")] == "3"
    assert cells[("0.55", "0.9")] == "1"


def test_plain_experiment_schema(capsys):
    code, out, _ = invoke(capsys, "experiment", "--trials", "500", "--seed", "4")
    rows = out.splitlines()
    assert rows[0] == "customer,mean,stderr"
    assert len(rows) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ("experiment", "--trials", "3000", "--seed", "99"),
        ("best-response-table", "--p", "0.6,0.9", "--paper-row-order"),
        ("solve-bayes", "--customers", "4"),
    ],
)
def test_repeated_runs_are_byte_identical(capsys, argv):
    _, first, _ = invoke(capsys, *argv)
    _, second, _ = invoke(capsys, *argv)
    assert first == second


def test_out_flag_writes_file(capsys, tmp_path):
    target = tmp_path / "out.csv"
    code, out, _ = invoke(capsys, "solve-perfect", "--out", str(target))
    assert code == 0 and out == ""
    assert target.read_text().startswith("kind,values\n")


def test_malformed_config_exit_code(capsys, tmp_path):
    code, out, err = invoke(capsys, "solve-perfect", "--config", write(tmp_path, "game:\n  customers: 3\n"))
    assert code == 2
    assert out == ""
    assert "line 1" in err and "sizes" in err


def test_bad_flags_exit_code(capsys):
    assert invoke(capsys, "solve-perfect", "--state", "3")[0] == 2
    assert invoke(capsys, "solve-bayes", "--customers", "0")[0] == 2
    assert invoke(capsys, "solve-bayes", "--p", "1.2")[0] == 2


def test_budget_exit_code(capsys, monkeypatch):
    monkeypatch.setenv("CRG_BUDGET", "10")
    code, _, err = invoke(capsys, "solve-bayes", "--customers", "6")
    assert code == 3
    assert "budget" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "crgame", "solve-perfect"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "grouping,2,1" in proc.stdout
