"""Command-line front end: artifacts, manifests, replay, exit codes."""
import csv
import json

import numpy as np
import pytest

from spo import (QuboInstance,cli, gap_profile, linear_schedule, min_gap,
                 random_instance, read_instance, read_schedule_csv,
                 write_instance)
from spo.schedule import Schedule, validate


def run(argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_gen_single_file_and_directory(tmp_path, capsys):
    out = tmp_path / "inst.json"
    assert run(["gen", "--n", 3, "--seed", 7, "--out", out]) == 0
    assert "wrote 1 instance file(s)" in capsys.readouterr().out
    inst = read_instance(str(out))
    assert inst.n_qubits == 3
    assert np.all(np.abs(inst.h) <= 1.0)
    man = json.loads((tmp_path / "inst.json.manifest.json").read_text())
    assert man["command"] == "gen"
    assert man["output_paths"] == [str(out)]
    assert len(man["seeds"]) == 1

    again = tmp_path / "again.json"
    assert run(["gen", "--n", 3, "--seed", 7, "--out", again]) == 0
    assert again.read_bytes() == out.read_bytes()

    d = tmp_path / "batch"
    assert run(["gen", "--n", 2, "--count", 3, "--seed", 1, "--out", d]) == 0
    names = sorted(p.name for p in d.glob("instance_*.json"))
    assert names == ["instance_0000.json", "instance_0001.json", "instance_0002.json"]
    man = json.loads((d / "manifest.json").read_text())
    assert len(man["seeds"]) == 3 and len(man["output_paths"]) == 3


def test_gap_writes_profile_with_driver_gap(tmp_path, capsys):
    inst_path = tmp_path / "i.json"
    write_instance(random_instance(3, 5), str(inst_path))
    out = tmp_path / "prof.csv"
    assert run(["gap", "--instance", inst_path, "--N", 20, "--k", 3,
                "--out", out]) == 0
    rows = read_csv(out)
    assert rows[0] == ["i", "s", "lambda0", "lambda1", "lambda2", "gap"]
    assert len(rows) == 22
    assert float(rows[1][-1]) == pytest.approx(2.0, abs=1e-9)
    assert rows[-1][1] == "1"
    assert "min gap" in capsys.readouterr().out
    assert (tmp_path / "prof.csv.manifest.json").exists()


def test_gap_accepts_schedule_file(tmp_path):
    inst = random_instance(2, 4)
    inst_path = tmp_path / "i.json"
    write_instance(inst, str(inst_path))
    sched_path = tmp_path / "s.csv"
    from spo import write_schedule_csv
    write_schedule_csv(linear_schedule(2, 10, 1.0, 2.5), str(sched_path))
    out = tmp_path / "prof.csv"
    assert run(["gap", "--instance", inst_path, "--schedule", sched_path,
                "--k", 2, "--out", out]) == 0
    assert len(read_csv(out)) == 12


@pytest.mark.parametrize("method,extra", [
    ("convex", ["--p", "3"]),
    ("direct", []),
])
def test_optimize_writes_schedule_and_report(tmp_path, method, extra):
    inst = random_instance(2, 0)
    inst_path = tmp_path / "i.json"
    write_instance(inst, str(inst_path))
    out = tmp_path / "sched.csv"
    assert run(["optimize", "--instance", inst_path, "--method", method,
                "--N", 20, "--out", out] + extra) == 0
    sched = read_schedule_csv(str(out))
    assert validate(sched) == []
    report = json.loads((tmp_path / "sched.csv.report.json").read_text())
    assert report["method"] == method
    g, i = min_gap(gap_profile(inst, sched, k=2), scope="interior")
    assert report["final_min_gap"] == pytest.approx(g, abs=1e-9)
    assert report["i_min"] == i
    man = json.loads((tmp_path / "sched.csv.manifest.json").read_text())
    assert man["output_paths"] == [str(out), str(out) + ".report.json"]


def test_evolve_csv_and_doubling_check(tmp_path, capsys):
    inst_path = tmp_path / "zero.json"
    write_instance(QuboInstance(2, np.zeros(2), np.zeros((2, 2))), str(inst_path))
    out = tmp_path / "ev.csv"
    assert run(["evolve", "--instance", inst_path, "--N", 10, "--T", 3,
                "--T", 5, "--substeps", 2, "--check-doubling", "--out", out]) == 0
    rows = read_csv(out)
    assert rows[0] == ["T", "p_succ", "norm_drift", "steps"]
    assert len(rows) == 3
    for row in rows[1:]:
        assert float(row[1]) == pytest.approx(1.0, abs=1e-12)  # h = J = 0
        assert int(row[3]) == 20
    man = json.loads((tmp_path / "ev.csv.manifest.json").read_text())
    assert [d["T"] for d in man["doubling_deltas"]] == [3.0, 5.0]
    assert all(d["delta_p_succ"] < 1e-9 for d in man["doubling_deltas"])
    assert "doubled substeps" in capsys.readouterr().out


def test_study_perturb_replay_is_bit_identical(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    base = ["study", "--kind", "perturb", "--n", 2, "--instances", 2,
            "--perturbations", 3, "--T", 2, "--N", 10, "--seed", 5,
            "--bins", 8]
    assert run(base + ["--out", d1]) == 0
    assert run(["study", "--manifest", d1 / "manifest.json", "--out", d2]) == 0
    for name in ("records.csv", "summary.json", "hist_omega.csv",
                 "hist_delta_p.csv"):
        assert (d2 / name).read_bytes() == (d1 / name).read_bytes()
    m1 = json.loads((d1 / "manifest.json").read_text())
    m2 = json.loads((d2 / "manifest.json").read_text())
    assert m1["parameters"] == m2["parameters"]
    assert len(m1["histograms"]["omega_edges"]) == 9
    summ = json.loads((d1 / "summary.json").read_text())
    assert summ["n_instances"] == 2 and summ["n_perturbations"] == 3
    rows = read_csv(d1 / "records.csv")
    assert len(rows) == 7  # header + 2*3 records


def test_study_mine_outputs(tmp_path, capsys):
    d = tmp_path / "mine"
    assert run(["study", "--kind", "mine", "--n", 2, "--pool", 6, "--keep", 2,
                "--T", 3, "--N", 10, "--seed", 3, "--out", d]) == 0
    kept = read_csv(d / "kept.csv")
    pool = read_csv(d / "pool.csv")
    assert kept[0] == ["pool_index", "seed", "p_succ", "min_gap", "s_min"]
    assert len(kept) == 3 and len(pool) == 7
    ps = [float(r[2]) for r in kept[1:]]
    assert ps == sorted(ps)
    summ = json.loads((d / "summary.json").read_text())
    assert summ["hardest_seed"] == int(kept[1][1])
    assert summ["hardest_p_succ"] == pytest.approx(ps[0], abs=1e-9)
    assert "hardest" in capsys.readouterr().out


def test_study_eps_sweep_and_compare(tmp_path):
    inst = random_instance(2, 0)  # interior minimum on these grids
    for N in (16, 20):
        sched = linear_schedule(2, N, inst.coupling_scale(), 2.5)
        _, idx = min_gap(gap_profile(inst, sched, k=2), scope="full")
        assert 0 < idx < N
    inst_path = tmp_path / "i.json"
    write_instance(inst, str(inst_path))

    d = tmp_path / "sweep"
    assert run(["study", "--kind", "eps_sweep", "--instance", inst_path,
                "--eps", 0.3, "--eps", 1.0, "--N", 16, "--out", d]) == 0
    rows = read_csv(d / "sweep.csv")
    assert rows[0] == ["eps", "min_gap"]
    gaps = [float(r[1]) for r in rows[1:]]
    assert len(gaps) == 2
    assert gaps[1] >= gaps[0] - 1e-4

    d = tmp_path / "cmp"
    assert run(["study", "--kind", "compare", "--instance", inst_path,
                "--method", "convex", "--T", 2, "--T", 4, "--N", 20,
                "--out", d]) == 0
    rows = read_csv(d / "compare.csv")
    assert rows[0] == ["T", "p_succ_linear", "p_succ_spo"]
    assert [float(r[0]) for r in rows[1:]] == [2.0, 4.0]
    sched = read_schedule_csv(str(d / "schedule.csv"))
    assert validate(sched) == []
    gaps = json.loads((d / "gaps.json").read_text())
    assert gaps["min_gap_optimized"] >= gaps["min_gap_linear"] - 1e-9


def test_study_accepts_bare_parameter_map(tmp_path):
    man = tmp_path / "params.json"
    man.write_text(json.dumps({"kind": "mine", "n": 2, "pool": 4, "keep": 1,
                               "T": 2.0, "N": 10}))
    d = tmp_path / "out"
    assert run(["study", "--manifest", man, "--out", d]) == 0
    assert (d / "kept.csv").exists()


def test_exit_codes(tmp_path, capsys):
    inst_path = tmp_path / "i.json"
    write_instance(random_instance(2, 4), str(inst_path))
    out = tmp_path / "o"

    # I/O and schema errors -> 2
    assert run(["gap", "--instance", tmp_path / "missing.json", "--out", out]) == 2
    assert capsys.readouterr().err.startswith("error:")
    bad = tmp_path / "bad.json"
    bad.write_text("not json {")
    assert run(["gap", "--instance", bad, "--out", out]) == 2
    assert run(["gap", "--instance", inst_path, "--fbound", "-1",
                "--out", out]) == 2

    # domain failure (infeasible schedule) -> 1
    vals = np.full((4, 11), 0.2)
    sched = Schedule(2, vals, f_bound=1.0, slew=25.0)
    assert validate(sched) != []
    from spo import write_schedule_csv
    sched_path = tmp_path / "bad_sched.csv"
    write_schedule_csv(sched, str(sched_path))
    assert run(["gap", "--instance", inst_path, "--schedule", sched_path,
                "--out", out]) == 1
    assert "boundary" in capsys.readouterr().err

    # usage errors -> SystemExit(2) from argparse
    with pytest.raises(SystemExit) as ei:
        run(["study", "--kind", "bogus", "--out", out])
    assert ei.value.code == 2

    # study parameter errors -> 2 with the offending key named
    assert run(["study", "--out", out]) == 2
    assert "--kind" in capsys.readouterr().err
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"kind": "mine", "n": 2, "bogus_key": 1}))
    assert run(["study", "--manifest", man, "--out", out]) == 2
    assert "bogus_key" in capsys.readouterr().err
    man.write_text(json.dumps({"kind": "mine", "n": 2}))
    assert run(["study", "--manifest", man, "--kind", "perturb",
                "--out", out]) == 2
    assert "kind" in capsys.readouterr().err
    man.write_text(json.dumps({"kind": "mine", "n": "two"}))
    assert run(["study", "--manifest", man, "--out", out]) == 2
    assert "'n' must be int" in capsys.readouterr().err
    assert run(["study", "--kind", "eps_sweep", "--instance", inst_path,
                "--out", out]) == 2
    assert "eps_list" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        run(["--version"])
    assert ei.value.code == 0
    assert capsys.readouterr().out.startswith("spo ")
