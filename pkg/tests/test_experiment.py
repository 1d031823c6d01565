import csv
import json

import pytest

from poincare_lab.experiment import (
    ConfigError,
    ExperimentConfig,
    fmt,
    run,
    to_csv,
)
from poincare_lab.zoo import ZOO_NAMES, zoo


def config(tmp_path, tasks, measures=(), **numerics):
    return ExperimentConfig.from_dict({
        "measures": list(measures),
        "tasks": tasks,
        "numerics": numerics,
        "output": {"directory": str(tmp_path / "out"), "formats": ["csv", "json"]},
    })


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_zoo_contents():
    z = zoo()
    assert len(z) >= 6 and tuple(z) == ZOO_NAMES
    assert z["gaussian_std"].variance() == pytest.approx(1, abs=1e-4)
    assert z["uniform01"].variance() == pytest.approx(1 / 12, abs=1e-4)


def test_empty_task_list(tmp_path):
    result = run(config(tmp_path, []))
    assert result.status == 0
    assert json.loads(result.summary_path.read_text())["verdicts"] == []


def test_example1_style_trace(tmp_path):
    cfg = config(tmp_path, [{"id": "trace", "type": "clt_trace", "measure": "u",
                             "n_list": [1, 2, 4, 8], "delta2": 0}],
                 measures=[{"name": "u", "uniform": [0, 1]}])
    result = run(cfg)
    assert result.status == 0
    rows = read_csv(tmp_path / "out" / "trace.csv")
    c = [float(r["c_p"]) for r in rows]
    assert all(b <= a + 1e-6 for a, b in zip(c, c[1:]))
    assert rows[0]["bound_example2"] == ""


def test_summary_schema_and_determinism(tmp_path):
    tasks = [{"id": "gap", "type": "verify_gap", "measures": ["uniform01", "gaussian_std"]},
             {"id": "sub", "type": "verify_subset", "measure": "gaussian_std"},
             {"id": "b", "type": "bounds_subadditivity", "args": {"c_mu": 1, "c_nu": 1},
              "measured": 2.0}]
    first = run(config(tmp_path / "a", tasks))
    second = run(config(tmp_path / "b", tasks))
    assert first.status == second.status == 0
    for name in ("gap.csv", "sub.csv", "b.csv"):
        assert (tmp_path / "a/out" / name).read_bytes() == (tmp_path / "b/out" / name).read_bytes()
    summary = json.loads(first.summary_path.read_text())
    for row in summary["verdicts"]:
        assert set(row) == {"task", "inequality", "lhs", "rhs", "margin", "holds"}
    assert summary["numerics"]["n_grid"] == 4096


def test_failed_verdict_sets_status(tmp_path):
    tasks = [{"type": "bounds_subadditivity", "args": {"c_mu": 1, "c_nu": 1}, "measured": 3.0}]
    assert run(config(tmp_path, tasks)).status == 1


def test_task_error_keeps_other_reports(tmp_path):
    tasks = [{"id": "bad", "type": "bounds_subadditivity", "args": {"c_mu": -1, "c_nu": 1}},
             {"id": "good", "type": "bounds_rate_explicit", "args": {"n": 3}}]
    result = run(config(tmp_path, tasks))
    assert result.status == 1 and "bad" in result.errors
    assert (tmp_path / "out" / "good.csv").exists()


def test_atomic_measure_in_wrong_task(tmp_path):
    cfg = config(tmp_path, [{"id": "e", "type": "estimate", "measure": "b"}],
                 measures=[{"name": "b", "atoms": [[-0.5, 0.5], [0.5, 0.5]]}])
    assert run(cfg).status == 1


@pytest.mark.parametrize("raw", [
    {"tasks": [{"type": "nonsense"}]},
    {"tasks": [{"type": "estimate", "measure": "missing"}]},
    {"tasks": [{"type": "verify_hypercube"}]},
    {"measures": [{"uniform": [0, 1]}]},
    {"output": {"formats": ["xml"]}},
    {"numerics": {"grid": 3}},
    {"extra": 1},
])
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_randomized_suite_task(tmp_path, monkeypatch):
    monkeypatch.setenv("POINCARE_LAB_THREADS", "2")
    tasks = [{"id": "hc", "type": "verify_hypercube", "instances": 50},
             {"id": "sh", "type": "verify_shearer", "instances": 50}]
    result = run(config(tmp_path, tasks, seed=11))
    assert result.status == 0
    assert len(read_csv(tmp_path / "out" / "sh.csv")) == 7


def test_csv_formatting():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(None) == "" and fmt(True) == "true"
    text = to_csv([{"a": 1.0, "b": None}])
    assert text == "a,b\n1,\n"
