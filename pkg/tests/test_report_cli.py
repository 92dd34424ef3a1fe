import json
import subprocess
import sys

import pytest

from dlsched.assigners import obta, wf
from dlsched.cli import main
from dlsched.model import Problem
from dlsched.report import (CSV_COLUMNS, ConfigError, ExperimentConfig, ExperimentError, cdf, read_jobs_csv,
                            run_experiment)
from dlsched.simulator import SimState, advance_to
from dlsched.workload import SyntheticConfig, make_workload, synthetic_trace


def test_cdf_examples():
    assert cdf([3]) == [(3, 1.0)]
    out = cdf([1, 1, 3])
    assert [v for v, _ in out] == [1, 3]
    assert out[0][1] == pytest.approx(2 / 3) and out[1][1] == 1.0
    assert cdf([0.1] * 3 + [0.2] * 7)[-1][1] == 1.0
    with pytest.raises(ValueError):
        cdf([])


def test_single_job_single_server(tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text("5,9,j,t,7\n")
    cfg = ExperimentConfig(("obta",), server_count=1, p_range=(1, 1), mu_range=(2, 2), trace=trace, out_dir=tmp_path)
    summary = run_experiment(cfg)
    rows = read_jobs_csv(tmp_path / "jobs.csv")
    assert len(rows) == 1 and rows[0]["jct_slots"] == 4
    assert summary.cells[0].average_jct == 4


def _small_cfg(tmp_path, **kw):
    base = dict(algorithms=("wf", "ocwf-acc"), server_count=10, alphas=(0.0, 2.0), utils=(0.5,), seeds=(0, 1),
                p_range=(3, 5), synthetic=SyntheticConfig(jobs=12, tasks_max=200), out_dir=tmp_path)
    base.update(kw)
    return ExperimentConfig(**base)


def test_csv_and_summary_agree(tmp_path):
    cfg = _small_cfg(tmp_path)
    summary = run_experiment(cfg)
    rows = read_jobs_csv(tmp_path / "jobs.csv")
    with open(tmp_path / "jobs.csv") as fh:
        assert tuple(fh.readline().strip().split(",")) == CSV_COLUMNS
    assert len(rows) == 12 * 2 * 2 * 2
    data = json.loads((tmp_path / "summary.json").read_text())
    assert len(data["cells"]) == 4
    for cell in data["cells"]:
        jcts = [r["jct_slots"] for r in rows if (r["algorithm"], r["alpha"], r["utilization"]) ==
                (cell["algorithm"], cell["alpha"], cell["utilization"])]
        assert cell["jobs"] == len(jcts)
        assert cell["average_jct"] == sum(jcts) / len(jcts)
        fracs = [f for _, f in cell["cdf"]]
        assert fracs == sorted(fracs) and fracs[-1] == 1.0
        assert summary.cell(cell["algorithm"], cell["alpha"], cell["utilization"]).average_jct == cell["average_jct"]


def test_rerun_is_reproducible(tmp_path):
    cols = [c for c in CSV_COLUMNS if c != "decision_overhead_us"]
    run_experiment(_small_cfg(tmp_path / "a"))
    run_experiment(_small_cfg(tmp_path / "b", workers=2))
    a, b = read_jobs_csv(tmp_path / "a" / "jobs.csv"), read_jobs_csv(tmp_path / "b" / "jobs.csv")
    assert [[r[c] for c in cols] for r in a] == [[r[c] for c in cols] for r in b]


def test_obta_never_worse_than_wf_per_decision():
    # optimality holds per arrival on a shared snapshot; averages over a whole run can go either way
    trace = synthetic_trace(SyntheticConfig(jobs=40, seed=1))
    jobs, cap = make_workload(trace, server_count=20, alpha=2.0, util=0.75, seed=1)
    state = SimState(0, {m: [] for m in range(1, 21)}, cap)
    for job in jobs:
        advance_to(state, job.arrival)
        state.admit(job)
        p = Problem.of(job, state.snapshot())
        w = wf(p)
        assert obta(p).phi <= w.phi
        state.enqueue(w)


@pytest.mark.parametrize("kw", [
    dict(algorithms=()),
    dict(algorithms=("magic",)),
    dict(utils=(0.0,)),
    dict(utils=(1.2,)),
    dict(p_range=(5, 3)),
    dict(p_range=(3, 11)),
    dict(mu_range=(0, 2)),
    dict(alphas=(-1.0,)),
    dict(seeds=()),
    dict(job_limit=0),
    dict(workers=0),
    dict(util_mu=0.0),
    dict(synthetic=None),
])
def test_config_errors(tmp_path, kw):
    with pytest.raises(ConfigError):
        _small_cfg(tmp_path, **kw)


def test_trace_and_synthetic_are_exclusive(tmp_path):
    with pytest.raises(ConfigError):
        _small_cfg(tmp_path, trace=tmp_path / "x.csv")


def test_runtime_errors_name_the_cell(tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text("1,1,a,t,3\n1,1,b,t,3\n")
    cfg = ExperimentConfig(("wf",), server_count=4, p_range=(1, 2), trace=trace)
    with pytest.raises(ExperimentError, match="algorithm=wf"):
        run_experiment(cfg)


def test_cli_success(tmp_path, capsys):
    rc = main(["--synthetic", "--jobs", "8", "--servers", "10", "--p-min", "2", "--p-max", "4", "--algo", "wf",
               "--algo", "obta", "--alpha", "1", "--util", "0.6", "--seed", "3", "--out", str(tmp_path)])
    assert rc == 0
    assert "obta" in capsys.readouterr().out
    assert len(read_jobs_csv(tmp_path / "jobs.csv")) == 16


def test_cli_config_error(tmp_path, capsys):
    rc = main(["--synthetic", "--algo", "wf", "--util", "1.5", "--servers", "20", "--out", str(tmp_path)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_cli_missing_trace(tmp_path):
    assert main(["--trace", str(tmp_path / "none.csv"), "--algo", "wf", "--out", str(tmp_path)]) == 2


def test_cli_runtime_error(tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text("1,1,a,t,3\n1,1,b,t,3\n")
    rc = main(["--trace", str(trace), "--algo", "wf", "--servers", "4", "--p-min", "1", "--p-max", "2",
               "--out", str(tmp_path / "o")])
    assert rc == 1


def test_cli_trace_columns(tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text("job,count,time\na,5,0\nb,3,10\na,2,4\n")
    rc = main(["--trace", str(trace), "--skip-header", "--col-ts", "2", "--col-job", "0", "--col-instances", "1",
               "--algo", "rd", "--servers", "6", "--p-min", "2", "--p-max", "3", "--out", str(tmp_path / "o")])
    assert rc == 0
    assert len(read_jobs_csv(tmp_path / "o" / "jobs.csv")) == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "dlsched", "--synthetic", "--jobs", "3", "--servers", "12",
                          "--algo", "wf", "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
