"""Study orchestration: perturbation stats, mining, comparisons, sweeps."""
import numpy as np
import pytest

import oracles
import spo.experiments
from spo import (ConvexConfig, compare_spo, epsilon_sweep, evolve,
                 find_interior_min_instances, find_liftable_instances,
                 gap_profile, linear_schedule, mine_hard_instances, min_gap,
                 random_instance, run_perturbation_study)
from spo.direct import DirectConfig
from spo.experiments import nearest_rank_percentile


def test_nearest_rank_percentile_matches_exhaustive_definition():
    rng = np.random.default_rng(81)
    for _ in range(60):
        m = int(rng.integers(1, 11))
        vals = rng.normal(size=m)
        pct = float(rng.uniform(1.0, 100.0))
        got = nearest_rank_percentile(vals, pct)
        assert got == oracles.nearest_rank_exhaustive(vals, pct)
    assert nearest_rank_percentile([3.0, 1.0, 2.0], 100.0) == 3.0
    assert nearest_rank_percentile([3.0, 1.0, 2.0], 1.0) == 1.0
    with pytest.raises(ValueError):
        nearest_rank_percentile([], 50.0)


def test_study_is_deterministic():
    a_rec, a_sum = run_perturbation_study(2, 2, 3, "unrestricted", 2.0, 99, N=10)
    b_rec, b_sum = run_perturbation_study(2, 2, 3, "unrestricted", 2.0, 99, N=10)
    assert [r.to_dict() for r in a_rec] == [r.to_dict() for r in b_rec]
    assert a_sum.to_dict() == b_sum.to_dict()
    c_rec, _ = run_perturbation_study(2, 2, 3, "unrestricted", 2.0, 100, N=10)
    assert [r.to_dict() for r in c_rec] != [r.to_dict() for r in a_rec]


def test_study_summary_shape_and_invariants():
    rec, summ = run_perturbation_study(2, 3, 4, "all_negative", 2.0, 7, N=10)
    assert len(rec) == 12
    assert summ.restriction == "all_negative" and summ.T == 2.0
    assert summ.n_instances == 3 and summ.n_perturbations == 4
    assert summ.pct35_omega <= summ.pct65_omega + 1e-15
    assert summ.pct35_dp <= summ.pct65_dp + 1e-15
    assert summ.n_gap_increase + summ.n_gap_decrease <= 3
    assert summ.n_succ_increase + summ.n_succ_decrease <= 3
    for r in rec:
        assert np.isfinite(r.omega) and np.isfinite(r.delta_p)
        assert r.T == 2.0
        assert r.restriction == "all_negative"
        assert r.omega == pytest.approx(r.perturbed_min_gap - r.baseline_min_gap)
        assert r.delta_p == pytest.approx(r.perturbed_p_succ - r.baseline_p_succ)
    with pytest.raises(ValueError):
        run_perturbation_study(2, 0, 4, "all_negative", 2.0, 7)
    with pytest.raises(ValueError):
        run_perturbation_study(2, 3, 4, "sideways", 2.0, 7)


def test_identity_perturbation_gives_exact_zeros(monkeypatch):
    # force the zero perturbation through the full pipeline: every record must
    # come out at omega = delta_p = 0 exactly, not within a tolerance
    def zero_schedule(coeffs, N, f_bound, slew, normalization="norm_sq"):
        return linear_schedule(coeffs.n_qubits, N, f_bound, slew)

    monkeypatch.setattr(spo.experiments, "quadratic_random_schedule", zero_schedule)
    rec, summ = run_perturbation_study(3, 3, 1, "all_positive", 4.0, 11, N=12)
    assert len(rec) == 3
    for r in rec:
        assert r.omega == 0.0
        assert r.delta_p == 0.0
    assert summ.mean_omega == 0.0 and summ.mean_delta_p == 0.0
    assert summ.n_gap_increase == 0 and summ.n_succ_increase == 0
    assert summ.n_gap_decrease == 0 and summ.n_succ_decrease == 0


def test_baseline_is_cached_and_matches_reevaluation():
    rec, _ = run_perturbation_study(2, 1, 3, "unrestricted", 3.0, 21, N=10)
    seeds = {r.instance_seed for r in rec}
    assert len(seeds) == 1
    inst = random_instance(2, rec[0].instance_seed)
    base = linear_schedule(2, 10, inst.coupling_scale(), 2.5)
    g, _ = min_gap(gap_profile(inst, base, k=2), scope="full")
    p = evolve(inst, base, 3.0, 1).p_succ
    for r in rec:
        assert r.baseline_min_gap == g
        assert r.baseline_p_succ == p


def test_infeasible_draws_are_resampled_and_reported():
    rec, summ = run_perturbation_study(2, 2, 20, "all_positive", 2.0, 13,
                                       N=10, f_bound=0.12)
    assert len(rec) == 40
    assert summ.n_resampled > 0


def test_mining_pool_of_one_and_field_honesty():
    kept = mine_hard_instances(2, 1, 3.0, 1, 12345, N=10)
    assert len(kept) == 1
    r = kept[0]
    assert r.pool_index == 0
    inst = random_instance(2, r.seed)
    sched = linear_schedule(2, 10, max(inst.coupling_scale(), 1.0), 2.5)
    prof = gap_profile(inst, sched, k=2)
    g, i = min_gap(prof, scope="full")
    assert r.min_gap == pytest.approx(g, abs=1e-12)
    assert r.s_min == pytest.approx(i / 10, abs=1e-12)
    assert r.p_succ == pytest.approx(evolve(inst, sched, 3.0, 1).p_succ, abs=1e-12)


def test_mining_ranking_and_pool_return():
    kept, pool = mine_hard_instances(3, 12, 3.0, 4, 777, N=10, with_pool=True)
    assert len(pool) == 12 and len(kept) == 4
    ps = [r.p_succ for r in kept]
    assert ps == sorted(ps)
    assert max(ps) <= min(r.p_succ for r in pool if r not in kept) + 1e-15
    again = mine_hard_instances(3, 12, 3.0, 4, 777, N=10)
    assert [r.to_dict() for r in again] == [r.to_dict() for r in kept]
    with pytest.raises(ValueError):
        mine_hard_instances(3, 12, 3.0, 13, 777)
    with pytest.raises(ValueError):
        mine_hard_instances(3, 12, 3.0, 0, 777)


def _interior_min_instance(n, N):
    for seed in range(300):
        inst = random_instance(n, seed)
        sched = linear_schedule(n, N, inst.coupling_scale(), 2.5)
        _, idx = min_gap(gap_profile(inst, sched, k=2), scope="full")
        if 0 < idx < N:
            return inst
    raise AssertionError("no interior-minimum instance found")


def _endpoint_min_instance(n, N):
    for seed in range(300):
        inst = random_instance(n, seed)
        sched = linear_schedule(n, N, inst.coupling_scale(), 2.5)
        _, idx = min_gap(gap_profile(inst, sched, k=2), scope="full")
        if idx in (0, N):
            return inst
    raise AssertionError("no endpoint-minimum instance found")


def test_compare_rejects_endpoint_limited_instances():
    inst = _endpoint_min_instance(2, 20)
    with pytest.raises(ValueError):
        compare_spo(inst, [5.0], N=20)


def test_compare_input_validation():
    inst = _interior_min_instance(2, 20)
    with pytest.raises(ValueError):
        compare_spo(inst, [], N=20)
    with pytest.raises(ValueError):
        compare_spo(inst, [5.0, -1.0], N=20)
    with pytest.raises(ValueError):
        compare_spo(inst, [5.0], method="annealed", N=20)


def test_compare_uses_supplied_schedule_and_reports_gaps():
    inst = _interior_min_instance(3, 20)
    sched = linear_schedule(3, 20, inst.coupling_scale(), 2.5)
    cmp_ = compare_spo(inst, [2.0, 4.0], optimized_schedule=sched, N=20)
    assert cmp_.report is None
    assert cmp_.min_gap_optimized == pytest.approx(cmp_.min_gap_linear, abs=1e-12)
    for T, p_lin, p_opt in cmp_.rows:
        assert p_opt == pytest.approx(p_lin, abs=1e-12)  # same schedule
    d = cmp_.to_dict()
    assert [row["T"] for row in d["rows"]] == [2.0, 4.0]


def test_compare_convex_runs_once_and_orders_gaps():
    inst = _interior_min_instance(3, 20)
    cmp_ = compare_spo(inst, [3.0, 6.0], method="convex",
                       config=ConvexConfig(p=3, N=20), N=20)
    assert cmp_.min_gap_optimized >= cmp_.min_gap_linear - 1e-9
    assert cmp_.report is not None
    assert len(cmp_.rows) == 2
    prof = gap_profile(inst, cmp_.schedule, k=2)
    g, _ = min_gap(prof, scope="interior")
    assert cmp_.min_gap_optimized == pytest.approx(g, abs=1e-9)


def test_compare_large_time_limit_closes_the_gap():
    # with a grid fine enough that the piecewise-constant model is not the
    # bottleneck, both paths saturate near 1 and the methods stop mattering
    inst = random_instance(2, 0)
    cfg = DirectConfig(betas=(10.0, 50.0), max_iters_per_beta=25)
    cmp_ = compare_spo(inst, [300.0], method="direct", config=cfg, N=150)
    T, p_lin, p_opt = cmp_.rows[0]
    assert p_lin > 0.99 and p_opt > 0.99
    assert abs(p_opt - p_lin) < 0.01


def test_epsilon_sweep_validation_and_zero_limit():
    inst = _interior_min_instance(3, 20)
    with pytest.raises(ValueError):
        epsilon_sweep(inst, [0.5, 0.5], N=20)
    with pytest.raises(ValueError):
        epsilon_sweep(inst, [-0.5, 1.0], N=20)
    sched = linear_schedule(3, 20, inst.coupling_scale(), 2.5)
    g_full, _ = min_gap(gap_profile(inst, sched, k=2), scope="full")
    out = epsilon_sweep(inst, [1e-9], N=20, config=ConvexConfig(p=3))
    assert out[0][0] == 1e-9
    assert out[0][1] == pytest.approx(g_full, abs=1e-6)


def test_epsilon_sweep_monotone_small_case():
    inst = _interior_min_instance(3, 20)
    out = epsilon_sweep(inst, [0.3, 2.0], N=20, config=ConvexConfig(p=3))
    assert out[0][1] <= out[1][1] + 1e-4


def test_instance_scanners_are_prefix_stable_and_honest():
    few = find_interior_min_instances(3, 2, 4242, N=16)
    more = find_interior_min_instances(3, 4, 4242, N=16)
    assert [i.seed for i in more[:2]] == [i.seed for i in few]
    for inst in more:
        sched = linear_schedule(3, 16, max(inst.coupling_scale(), 1.0), 2.5)
        _, idx = min_gap(gap_profile(inst, sched, k=2), scope="full")
        assert 0 < idx < 16


def test_liftable_scanner_enforces_both_thresholds():
    got = find_liftable_instances(3, 2, 4242, N=16, max_interior_gap=0.8,
                                  min_endpoint_floor=0.8)
    for inst in got:
        sched = linear_schedule(3, 16, max(inst.coupling_scale(), 1.0), 2.5)
        prof = gap_profile(inst, sched, k=2)
        g, idx = min_gap(prof, scope="full")
        assert 0 < idx < 16
        assert g <= 0.8
        assert min(prof.gaps[0], prof.gaps[16]) >= 0.8
    with pytest.raises(RuntimeError):
        find_liftable_instances(3, 1, 4242, N=16, min_endpoint_floor=50.0,
                                max_draws=64)
