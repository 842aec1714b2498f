import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from mudalloc import cli
from mudalloc.config import load_plan, parse_plan, plan_to_ini
from mudalloc.errors import ConfigError, NumericalError
from mudalloc.harness import (
    RESULT_COLUMNS,
    ExperimentPlan,
    converge_trace,
    run_experiment,
    trial_seeds,
    tradeoff_report,
)
from mudalloc.scenario import ScenarioConfig, build_scenario

GOLDEN = Path(__file__).parent / "golden" / "sweep_seed123.csv"
SMALL = ScenarioConfig(num_users=8, num_res=4, num_sats=4, epsilon=0.1)


def golden_plan():
    return ExperimentPlan(scenario=SMALL, sweep="q_s", values=(2, 4), trials=2, seed=123,
                          allocators=("proposed", "greedy", "round_robin", "centralized"))


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_single_row_plan():
    plan = ExperimentPlan(scenario=SMALL, trials=1, allocators=("round_robin",))
    table = run_experiment(plan)
    kinds = [r["kind"] for r in table.rows]
    assert kinds == ["trial", "aggregate"]
    out = rows(table.to_csv())
    assert tuple(out[0].keys()) == RESULT_COLUMNS
    assert out[0]["sum_rate"] == out[1]["sum_rate"] and out[1]["n"] == "1"


def test_golden_csv_byte_identical():
    text = run_experiment(golden_plan()).to_csv()
    assert text == run_experiment(golden_plan()).to_csv()
    assert text.encode("utf-8") == GOLDEN.read_bytes()


def test_worker_pool_preserves_order():
    serial = run_experiment(golden_plan()).to_csv()
    pooled = run_experiment(golden_plan().with_(workers=2)).to_csv()
    assert pooled == serial


def test_trial_seeds_shared_across_sweep_points():
    plan = ExperimentPlan(scenario=SMALL, sweep="epsilon", values=(0.0, 0.3), trials=2,
                          allocators=("greedy",))
    table = run_experiment(plan)
    a = [r["load_per_sat"] for r in table.rows if r["kind"] == "trial" and r["sweep_value"] == 0.0]
    b = [r["load_per_sat"] for r in table.rows if r["kind"] == "trial" and r["sweep_value"] == 0.3]
    assert a == b  # same scenarios, greedy ignores epsilon
    assert trial_seeds(0, 1) != trial_seeds(0, 2) != trial_seeds(1, 1)


def test_row_level_errors_do_not_stop_the_run():
    plan = ExperimentPlan(scenario=SMALL, trials=2, q_s=1, q_l=2.0,
                          allocators=("proposed", "greedy", "centralized"))
    table = run_experiment(plan)
    errs = {(r["allocator"], r["error"]) for r in table.rows if r["kind"] == "trial"}
    assert errs == {("proposed", "infeasible"), ("greedy", "infeasible"), ("centralized", "")}
    agg = {r["allocator"]: r for r in table.rows if r["kind"] == "aggregate"}
    assert agg["proposed"]["error"] == "all_failed" and agg["centralized"]["n"] == 2


def test_exhaustive_budget_is_recorded():
    plan = ExperimentPlan(scenario=ScenarioConfig(num_users=20, num_res=4, num_sats=4),
                          trials=1, q_s=5, allocators=("exhaustive",))
    assert run_experiment(plan).rows[0]["error"] == "budget"


def test_metadata_and_files(tmp_path):
    table = run_experiment(golden_plan())
    table.write(tmp_path / "r.csv", tmp_path / "t.csv", tmp_path / "m.json")
    meta = json.loads((tmp_path / "m.json").read_text())
    assert [p["q_l"] for p in meta["points"]] == [1.0, 2.0]
    assert meta["q_l_rule"].startswith("q_s*K/J clamped")
    timing = rows((tmp_path / "t.csv").read_text())
    assert len(timing) == 2 * 2 * 4 and all(float(t["wall_time"]) >= 0 for t in timing)


def test_plan_validation():
    for bad in (dict(trials=0), dict(sweep="N"), dict(sweep="epsilon", values=(-0.1,)),
                dict(sweep="q_s", values=(0,)), dict(sweep="q_s", values=(9,)),
                dict(sweep="J", values=(0,)), dict(allocators=("oracle",)),
                dict(sweep="epsilon"), dict(q_s=0)):
        with pytest.raises(ConfigError):
            ExperimentPlan(scenario=SMALL, **bad)


def test_converge_trace_rows():
    plan = ExperimentPlan(scenario=SMALL, trials=3, q_s=2, allocators=("proposed",))
    table = converge_trace(plan)
    by_trial = {}
    for r in table.rows:
        by_trial.setdefault(r["trial"], []).append(r)
    assert sorted(by_trial) == [0, 1, 2]
    for rs in by_trial.values():
        assert [r["outer_iter"] for r in rs] == list(range(1, len(rs) + 1))
        for r in rs:
            assert r["objective"] >= r["objective_start"] - 1e-9 * max(1, abs(r["objective_start"]))
        if rs[-1]["converged_at"] > 0:
            assert rs[-1]["max_nonintegrality"] < 1e-3
    with pytest.raises(ConfigError):
        converge_trace(plan.with_(allocators=("greedy",)))


def test_tradeoff_ratios():
    plan = ExperimentPlan(scenario=SMALL.with_(epsilon=0.0), sweep="q_s", values=(2, 4, 8),
                          trials=2)
    table = tradeoff_report(plan)
    last = table.rows[-1]
    assert last["q_s"] == 8 and last["load_ratio"] == 1.0 and last["rate_ratio"] == pytest.approx(1.0)
    for r in table.rows[:-1]:
        assert 0 < r["load_ratio"] <= 1 and 0 < r["rate_ratio"] <= 1
    with pytest.raises(ConfigError):
        tradeoff_report(plan.with_(sweep="epsilon", values=(0.0,)))


# -- config files --------------------------------------------------------------

def test_ini_roundtrip():
    plan = golden_plan()
    again = parse_plan(plan_to_ini(plan))
    assert again == plan


def test_ini_parsing():
    plan = parse_plan("""
[scenario]
num_users = 16
epsilon = 0.3
fading_model = rayleigh

[experiment]
sweep = J
values = 4, 6
allocators = proposed, greedy
trials = 3
q_l =

[solver]
lambda_scale = 0.5
pga_max_iters = 100
""")
    assert plan.scenario.num_users == 16 and plan.scenario.fading_model == "rayleigh"
    assert plan.values == (4, 6) and plan.allocators == ("proposed", "greedy")
    assert plan.q_l is None and plan.solver.lambda_scale == 0.5 and plan.solver.pga.max_iters == 100


@pytest.mark.parametrize("text", [
    "[scenario]\nnum_users = many\n",
    "[scenario]\ncolour = red\n",
    "[extra]\na = 1\n",
    "[solver]\neps_m = -1\n",
    "[experiment]\nsweep = q_s\nvalues = 1.5\n",
    "not an ini file",
])
def test_ini_errors(text):
    with pytest.raises(ConfigError):
        parse_plan(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_plan(tmp_path / "nope.ini")


# -- command line -----------------------------------------------------------------

@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "plan.ini"
    path.write_text(plan_to_ini(golden_plan().with_(trials=1)))
    return path


def test_cli_solve(cfg, tmp_path, capsys):
    out = tmp_path / "rep.json"
    assert cli.main(["solve", str(cfg), "--seed", "4", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["Q_binary"]) == 8 * 4 and rep["q_s"] == 3
    assert cli.main(["solve", str(cfg), "--interference-variant", "complement"]) == 0
    assert json.loads(capsys.readouterr().out.split("\n", 1)[1])["K"] == 8


def test_cli_sweep_converge_tradeoff(cfg, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sweep", str(cfg), "--out", str(out), "--trials", "2"]) == 0
    assert len(rows((out / "results.csv").read_text())) == 2 * 2 * 4 + 2 * 4
    assert (out / "timings.csv").exists() and (out / "metadata.json").exists()
    assert cli.main(["converge", str(cfg), "--out", str(out)]) == 0
    assert rows((out / "trace.csv").read_text())
    assert cli.main(["tradeoff", str(cfg), "--out", str(out)]) == 0
    assert len(rows((out / "tradeoff.csv").read_text())) == 2


def test_cli_scenario_dump(cfg, tmp_path):
    out = tmp_path / "dump"
    assert cli.main(["scenario", "dump", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    ch = rows((out / "channels.csv").read_text())
    sc = build_scenario(SMALL.with_(rng_seed=5))
    assert len(ch) == 4 * 8 * 4
    r = ch[7]
    n, k, j = int(r["n"]), int(r["k"]), int(r["j"])
    assert complex(float(r["re"]), float(r["im"])) == sc.channel.h[n, k, j]
    sig = rows((out / "signatures.csv").read_text())
    assert len(sig) == 4 * 8 and complex(float(sig[0]["re"]), float(sig[0]["im"])) == sc.signatures.s[0, 0]


def test_cli_exit_codes(cfg, tmp_path, monkeypatch):
    assert cli.main(["solve", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nnum_users = -3\n")
    assert cli.main(["solve", str(bad)]) == 2
    infeasible = tmp_path / "inf.ini"
    infeasible.write_text(cfg.read_text().replace("q_l = \n", "q_l = 4\n"))
    assert cli.main(["solve", str(infeasible)]) == 3

    def boom(*a, **k):
        raise NumericalError("non-finite objective", iterate=np.zeros((2, 2)))

    monkeypatch.setattr(cli, "solve", boom)
    assert cli.main(["solve", str(cfg)]) == 4
