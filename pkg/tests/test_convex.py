"""Trust-region LP solver: projector algebra, subproblem oracles, outer loop."""
import numpy as np
import pytest

import oracles
from spo import (ConvexConfig, QuboInstance, build_projectors, gap_profile,
                 linear_schedule, min_gap, optimize_convex, random_instance,
                 solve_subproblem, validate)
from spo.convex import IterationRecord
from spo.errors import ScheduleConstraintError


def _feasible(n, N, f_bound, slew, rng):
    sched = linear_schedule(n, N, f_bound, slew)
    return sched.with_values(oracles.smooth_feasible_values(n, N, f_bound, slew, rng))


def test_config_validation():
    assert ConvexConfig().p == 5
    for bad in (dict(p=0), dict(eta=0.0), dict(eta=-1.0), dict(xi=0.0),
                dict(max_outer=0), dict(lmi_tol=0.0), dict(eta_floor=0.0),
                dict(eta_floor=1.5), dict(f_bound=0.0), dict(slew=0.0),
                dict(N=1), dict(max_cut_rounds=0)):
        with pytest.raises(ValueError):
            ConvexConfig(**bad)


def test_projectors_single_column_and_clamping():
    inst = random_instance(2, 17)
    sched = linear_schedule(2, 8, 1.0, 2.5)
    prof = gap_profile(inst, sched, k=4)
    proj = build_projectors(inst, sched, 1, profile=prof)
    assert proj.p == 1
    assert proj.n_interior == 7
    for l in range(7):
        assert np.allclose(proj.phi0[l], prof.eigenvectors[l + 1, :, 0])
        assert np.allclose(proj.phi1[l][:, 0], prof.eigenvectors[l + 1, :, 1])
        assert np.allclose(proj.lam[l], prof.eigenvalues[l + 1, :2])
    # p clamps to dim - 1 on a single qubit
    one = QuboInstance(1, np.array([0.5]), np.zeros((1, 1)), 0)
    proj1 = build_projectors(one, linear_schedule(1, 6, 1.0, 2.5), 5)
    assert proj1.p == 1
    shallow = gap_profile(inst, sched, k=3)
    with pytest.raises(ValueError):
        build_projectors(inst, sched, 3, profile=shallow)  # k=3 < p+1 = 4


def test_projectors_orthonormal_eight_qubits():
    rng = np.random.default_rng(61)
    inst = random_instance(8, 808)
    sched = _feasible(8, 10, 1.0, 2.5, rng)
    proj = build_projectors(inst, sched, 5)
    assert proj.p == 5
    for l in range(proj.n_interior):
        block = np.concatenate([proj.phi0[l][:, None], proj.phi1[l]], axis=1)
        gram = block.conj().T @ block
        assert np.max(np.abs(gram - np.eye(6))) < 1e-9


def test_projectors_require_feasible_schedule():
    inst = random_instance(2, 3)
    bad_vals = np.zeros((4, 9))
    bad_vals[0, 0] = 1.0
    bad = linear_schedule(2, 8, 1.0, 2.5).with_values(bad_vals)
    with pytest.raises(ScheduleConstraintError):
        build_projectors(inst, bad, 2)


def test_bounds_at_incumbent_are_rayleigh_and_interlacing():
    # eps0 at the incumbent equals lambda0 exactly; eps1 is an upper-bounded
    # lower-dimensional minimum that interlaces above lambda1
    rng = np.random.default_rng(62)
    for seed in (1, 2, 3):
        inst = random_instance(3, seed)
        sched = _feasible(3, 8, 1.0, 2.5, rng)
        prof = gap_profile(inst, sched, k=4)
        proj = build_projectors(inst, sched, 3, profile=prof)
        cfg = ConvexConfig(p=3, N=8, f_bound=1.0)
        A_hat = sched.values[:, 1:8].copy()
        sol = solve_subproblem(inst, proj, A_hat, cfg, eta=0.0, f_bound=1.0,
                               slew=2.5, N=8)
        for l in range(7):
            H = oracles.assemble_dense(inst, sched, l + 1)
            u0 = proj.phi0[l]
            lam0 = prof.eigenvalues[l + 1, 0]
            lam1 = prof.eigenvalues[l + 1, 1]
            ray = float(np.real(u0.conj() @ (H @ u0)))
            assert abs(ray - lam0) < 1e-9
            block = proj.phi1[l].conj().T @ (H @ proj.phi1[l])
            emin = float(np.linalg.eigvalsh(np.real(block))[0])
            assert emin >= lam1 - 1e-9
            assert abs(sol.eps0[l] - ray) < 1e-9
            assert abs(sol.eps1[l] - emin) < 1e-9


def test_subproblem_eta_zero_pins_the_incumbent():
    rng = np.random.default_rng(63)
    inst = random_instance(3, 99)
    sched = _feasible(3, 10, 1.0, 2.5, rng)
    proj = build_projectors(inst, sched, 2)
    cfg = ConvexConfig(p=2, N=10, f_bound=1.0)
    A_hat = sched.values[:, 1:10].copy()
    sol = solve_subproblem(inst, proj, A_hat, cfg, eta=0.0, f_bound=1.0,
                           slew=2.5, N=10)
    assert np.max(np.abs(sol.A_star - A_hat)) < 1e-9
    assert sol.objective == pytest.approx(float(np.min(sol.eps1 - sol.eps0)), abs=1e-12)


def test_subproblem_objective_never_trails_incumbent():
    rng = np.random.default_rng(64)
    for seed in (5, 6):
        inst = random_instance(3, seed)
        sched = _feasible(3, 8, inst.coupling_scale(), 2.5, rng)
        proj = build_projectors(inst, sched, 2)
        cfg = ConvexConfig(p=2, N=8)
        A_hat = sched.values[:, 1:8].copy()
        sol = solve_subproblem(inst, proj, A_hat, cfg)
        # independent incumbent objective from dense blocks
        vals = []
        for l in range(7):
            H = oracles.assemble_dense(inst, sched, l + 1)
            u0 = proj.phi0[l]
            e0 = float(np.real(u0.conj() @ (H @ u0)))
            block = np.real(proj.phi1[l].conj().T @ (H @ proj.phi1[l]))
            e1 = float(np.linalg.eigvalsh(block)[0])
            vals.append(e1 - e0)
        assert sol.objective >= min(vals) - 1e-9
        assert np.isfinite(sol.upper_bound)
        assert sol.upper_bound >= sol.objective - 1e-9


def test_subproblem_matches_grid_search_one_qubit():
    # N=2: one interior point, A = (a_x, a_z); with p=1 every constraint is
    # scalar and affine, so exhaustive corner-inclusive grid search is exact
    inst = QuboInstance(1, np.array([0.6]), np.zeros((1, 1)), 0)
    N, f_bound, slew, eta = 2, 0.5, 2.5, 0.3
    sched = linear_schedule(1, N, f_bound, slew)
    proj = build_projectors(inst, sched, 1)
    cfg = ConvexConfig(p=1, N=N, f_bound=f_bound, slew=slew, eta=eta)
    A_hat = np.zeros((2, 1))
    sol = solve_subproblem(inst, proj, A_hat, cfg)

    cap = min(f_bound, eta, slew / N)
    grid = np.linspace(-cap, cap, 201)
    u0 = proj.phi0[0]
    u1 = proj.phi1[0][:, 0]
    H_mid = oracles.assemble_dense(inst, sched, 1)
    X = oracles.pauli_string_dense(1, ((0, "X"),))
    Z = oracles.pauli_string_dense(1, ((0, "Z"),))
    best = -np.inf
    for ax in grid:
        for az in grid:
            H = H_mid + ax * X + az * Z
            e0 = float(np.real(u0.conj() @ (H @ u0)))
            e1 = float(np.real(u1.conj() @ (H @ u1)))
            best = max(best, e1 - e0)
    assert sol.objective == pytest.approx(best, abs=1e-6)
    assert np.max(np.abs(sol.A_star)) <= cap + 1e-9


def test_subproblem_shape_validation():
    inst = random_instance(2, 4)
    sched = linear_schedule(2, 6, 1.0, 2.5)
    proj = build_projectors(inst, sched, 2)
    with pytest.raises(ValueError):
        solve_subproblem(inst, proj, np.zeros((3, 5)), ConvexConfig(p=2, N=6))


def test_trust_regions_nest_monotonically():
    rng = np.random.default_rng(65)
    inst = random_instance(3, 42)
    sched = _feasible(3, 8, 1.0, 2.5, rng)
    proj = build_projectors(inst, sched, 2)
    cfg = ConvexConfig(p=2, N=8, f_bound=1.0)
    A_hat = sched.values[:, 1:8].copy()
    objs = []
    for eta in (0.4, 0.2, 0.1, 0.05):
        sol = solve_subproblem(inst, proj, A_hat, cfg, eta=eta, f_bound=1.0,
                               slew=2.5, N=8)
        objs.append(sol.objective)
    for wide, narrow in zip(objs, objs[1:]):
        assert narrow <= wide + 1e-6


def test_iteration_record_json_keys_are_pinned():
    rec = IterationRecord(iter=3, surrogate_objective=0.5, true_min_gap=0.4,
                          i_min=7, cuts_added=12, eta=0.05, wall_time_s=0.1)
    d = rec.to_json_dict()
    assert list(d) == ["iter", "surrogate_objective", "true_min_gap", "i_min",
                       "cuts_added", "eta", "wall_time_s"]


def _endpoint_min_instance(N=20):
    for seed in range(200):
        inst = random_instance(2, seed)
        prof = gap_profile(inst, linear_schedule(2, N, inst.coupling_scale(), 2.5), k=3)
        _, idx = min_gap(prof, scope="full")
        if idx in (0, N):
            return inst
    raise AssertionError("no endpoint-minimum instance in the scanned range")


def test_optimize_convex_endpoint_minimum_returns_immediately():
    inst = _endpoint_min_instance()
    sched, report = optimize_convex(inst, ConvexConfig(p=2, N=20))
    assert report.best_case_already
    assert report.termination == "minimum_at_endpoint"
    assert report.iterations == []
    assert np.all(sched.values == 0.0)


def test_optimize_convex_lifts_and_reports_honestly():
    insts = []
    for seed in range(200):
        cand = random_instance(4, seed)
        prof = gap_profile(cand, linear_schedule(4, 30, cand.coupling_scale(), 2.5), k=3)
        _, idx = min_gap(prof, scope="full")
        if 0 < idx < 30:
            insts.append(cand)
            if len(insts) == 2:
                break
    for inst in insts:
        cfg = ConvexConfig(p=3, N=30)
        sched, report = optimize_convex(inst, cfg)
        assert validate(sched) == []
        assert report.termination in ("endpoint_floor", "stall", "eta_floor", "max_outer")
        recs = report.iterations
        assert recs, "interior-minimum instance must run at least one iteration"
        # accepted iterates never regress the true gap
        accepted = [r.true_min_gap for r in recs if r.accepted]
        assert all(a <= b + 1e-12 for a, b in zip(accepted, accepted[1:]))
        for r in recs:
            assert r.eps0_max_violation <= 1e-8
            assert r.eps1_max_violation <= 1e-8
            assert r.lmi_min_eig >= -1e-8
            if not r.accepted:
                assert r.improvement == 0.0
        # the reported gap is reproduced by an independent dense sweep
        mins = []
        for i in range(1, 30):
            H = oracles.assemble_dense(inst, sched, i)
            w = np.linalg.eigvalsh(H)
            mins.append(w[1] - w[0])
        assert report.final_min_gap == pytest.approx(min(mins), abs=1e-9)
        assert int(np.argmin(mins)) + 1 == report.i_min
        base = gap_profile(inst, linear_schedule(4, 30, inst.coupling_scale(), 2.5), k=3)
        g0, _ = min_gap(base, scope="interior")
        assert report.final_min_gap >= g0 - 1e-9
        assert np.isfinite(report.endpoint_gap_floor)
