"""Reproducible ensemble studies over random QUBO instances.

Every study derives its per-item randomness from one base seed via
numpy.random.SeedSequence keys, so reruns are bit-identical and items are
independent of execution order (thread parallelism never changes results;
worker threads only speed up the numpy/scipy kernels).

Conventions shared by the studies:
  * the baseline is always the pure linear schedule;
  * "min gap" statistics use the full grid i = 0..N (the endpoints are
    schedule-independent, so perturbations can only lower the global minimum
    when the baseline minimum sits at an endpoint);
  * success probabilities come from the piecewise-constant propagator at the
    study's total time T.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._util import derive_seed, derive_seeds, parallel_map
from .convex import ConvexConfig, optimize_convex
from .direct import DirectConfig, optimize_direct
from .dynamics import evolve
from .errors import ScheduleConstraintError
from .pauli import QuboInstance, random_instance
from .schedule import (RESTRICTIONS, Schedule, linear_schedule,
                       quadratic_random_schedule, sample_coefficients)
from .spectrum import gap_profile, min_gap

MAX_RESAMPLE_ATTEMPTS = 1000


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("percentile of an empty sample")
    rank = max(1, math.ceil(pct / 100.0 * arr.size))
    return float(arr[min(rank, arr.size) - 1])


@dataclass
class PerturbationRecord:
    instance_index: int
    instance_seed: int
    perturbation_index: int
    perturbation_seed: int
    restriction: str
    T: float
    omega: float            # perturbed minus baseline min gap (full grid)
    delta_p: float          # perturbed minus baseline success probability
    baseline_min_gap: float
    perturbed_min_gap: float
    baseline_p_succ: float
    perturbed_p_succ: float

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, float) else v)
                for k, v in self.__dict__.items()}


@dataclass
class StudySummary:
    restriction: str
    T: float
    n_instances: int
    n_perturbations: int
    mean_omega: float
    mean_delta_p: float
    pct35_omega: float      # 35th nearest-rank percentile per instance, averaged
    pct65_omega: float
    pct35_dp: float
    pct65_dp: float
    n_gap_increase: int     # instances whose mean omega over perturbations is > 0
    n_gap_decrease: int
    n_succ_increase: int    # instances whose mean delta_p is > 0
    n_succ_decrease: int
    n_resampled: int = 0

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, float) else v)
                for k, v in self.__dict__.items()}


def _perturbation_schedule(n: int, restriction: str, base_seed: int,
                           instance_index: int, r: int, N: int, f_bound: float,
                           slew: float, normalization: str):
    """Sample until the quadratic perturbation is feasible; returns (schedule, resamples)."""
    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        pseed = derive_seed(base_seed, instance_index, r, attempt)
        coeffs = sample_coefficients(n, restriction, pseed)
        try:
            sched = quadratic_random_schedule(coeffs, N, f_bound, slew,
                                              normalization=normalization)
        except ScheduleConstraintError:
            continue
        return sched, attempt, pseed
    raise ScheduleConstraintError([])  # practically unreachable for sane caps


def run_perturbation_study(n: int, n_instances: int, n_perturbations: int,
                           restriction: str, T: float, seed: int, N: int = 50,
                           f_bound: float | None = None, slew: float = 2.5,
                           substeps_per_interval: int | None = 1,
                           normalization: str = "norm_sq",
                           threads: int = 1) -> tuple[list[PerturbationRecord], StudySummary]:
    """Random quadratic-envelope perturbations versus the linear baseline.

    For each of n_instances random instances, n_perturbations schedules
    f_j(i) = s(1-s) c_j / ||c||^2 are sampled under the sign restriction;
    infeasible draws are resampled (count reported in the summary). Per sample
    the study records omega (change of the full-grid min gap) and delta_p
    (change of success probability at total time T).
    """
    if restriction not in RESTRICTIONS:
        raise ValueError(f"unknown restriction {restriction!r}; expected one of {RESTRICTIONS}")
    if n_instances < 1 or n_perturbations < 1:
        raise ValueError("need at least one instance and one perturbation")
    inst_seeds = derive_seeds(seed, n_instances)

    def run_instance(idx: int) -> tuple[list[PerturbationRecord], int]:
        iseed = inst_seeds[idx]
        inst = random_instance(n, iseed)
        fb = inst.coupling_scale() if f_bound is None else f_bound
        base = linear_schedule(n, N, fb, slew)
        base_profile = gap_profile(inst, base, k=2)
        base_min, _ = min_gap(base_profile, scope="full")
        base_p = evolve(inst, base, T, substeps_per_interval).p_succ
        records = []
        resampled = 0
        for r in range(n_perturbations):
            sched, attempts, pseed = _perturbation_schedule(
                n, restriction, seed, idx, r, N, fb, slew, normalization)
            resampled += attempts
            prof = gap_profile(inst, sched, k=2)
            pert_min, _ = min_gap(prof, scope="full")
            pert_p = evolve(inst, sched, T, substeps_per_interval).p_succ
            records.append(PerturbationRecord(
                instance_index=idx, instance_seed=iseed,
                perturbation_index=r, perturbation_seed=pseed,
                restriction=restriction, T=float(T),
                omega=pert_min - base_min, delta_p=pert_p - base_p,
                baseline_min_gap=base_min, perturbed_min_gap=pert_min,
                baseline_p_succ=base_p, perturbed_p_succ=pert_p))
        return records, resampled

    per_instance = parallel_map(run_instance, range(n_instances), threads=threads)
    records = [rec for recs, _ in per_instance for rec in recs]
    n_resampled = sum(res for _, res in per_instance)

    inst_mean_omega = []
    inst_mean_dp = []
    omega_p35, omega_p65, dp_p35, dp_p65 = [], [], [], []
    for recs, _ in per_instance:
        omegas = [r.omega for r in recs]
        dps = [r.delta_p for r in recs]
        inst_mean_omega.append(float(np.mean(omegas)))
        inst_mean_dp.append(float(np.mean(dps)))
        omega_p35.append(nearest_rank_percentile(omegas, 35))
        omega_p65.append(nearest_rank_percentile(omegas, 65))
        dp_p35.append(nearest_rank_percentile(dps, 35))
        dp_p65.append(nearest_rank_percentile(dps, 65))

    summary = StudySummary(
        restriction=restriction, T=float(T),
        n_instances=n_instances, n_perturbations=n_perturbations,
        mean_omega=float(np.mean(inst_mean_omega)),
        mean_delta_p=float(np.mean(inst_mean_dp)),
        pct35_omega=float(np.mean(omega_p35)), pct65_omega=float(np.mean(omega_p65)),
        pct35_dp=float(np.mean(dp_p35)), pct65_dp=float(np.mean(dp_p65)),
        n_gap_increase=sum(1 for v in inst_mean_omega if v > 0),
        n_gap_decrease=sum(1 for v in inst_mean_omega if v < 0),
        n_succ_increase=sum(1 for v in inst_mean_dp if v > 0),
        n_succ_decrease=sum(1 for v in inst_mean_dp if v < 0),
        n_resampled=n_resampled)
    return records, summary


@dataclass
class MiningRecord:
    pool_index: int
    seed: int
    p_succ: float
    min_gap: float   # full-grid minimum of the linear-schedule profile
    s_min: float     # grid location i_min / N of that minimum

    def to_dict(self) -> dict:
        return {"pool_index": self.pool_index, "seed": self.seed,
                "p_succ": float(self.p_succ), "min_gap": float(self.min_gap),
                "s_min": float(self.s_min)}


def mine_hard_instances(n: int, pool_size: int, T: float, keep: int, seed: int,
                        N: int = 50, slew: float = 2.5,
                        substeps_per_interval: int | None = 1,
                        threads: int = 1, with_pool: bool = False):
    """Rank a pool of random instances by linear-schedule success probability.

    Returns the keep hardest records sorted ascending by p_succ (ties keep
    pool order); keep = pool_size returns the whole ranked pool. Hard
    instances cluster toward small min gaps located late in the anneal.
    with_pool=True additionally returns the full scored pool in pool order,
    for whole-population statistics.
    """
    if not (1 <= keep <= pool_size):
        raise ValueError(f"keep must be in [1, pool_size={pool_size}], got {keep}")
    seeds = derive_seeds(seed, pool_size)

    def score(idx: int) -> MiningRecord:
        inst = random_instance(n, seeds[idx])
        sched = linear_schedule(n, N, max(inst.coupling_scale(), 1.0), slew)
        profile = gap_profile(inst, sched, k=2)
        g, i_min = min_gap(profile, scope="full")
        p = evolve(inst, sched, T, substeps_per_interval).p_succ
        return MiningRecord(pool_index=idx, seed=seeds[idx], p_succ=p,
                            min_gap=g, s_min=i_min / N)

    records = parallel_map(score, range(pool_size), threads=threads)
    order = np.argsort([r.p_succ for r in records], kind="stable")
    kept = [records[i] for i in order[:keep]]
    return (kept, records) if with_pool else kept


@dataclass
class SpoComparison:
    method: str
    rows: list[tuple[float, float, float]]  # (T, p_succ linear, p_succ optimized)
    min_gap_linear: float
    i_min_linear: int
    min_gap_optimized: float
    i_min_optimized: int
    schedule: Schedule
    report: object = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rows": [{"T": float(T), "p_succ_linear": float(a), "p_succ_spo": float(b)}
                     for T, a, b in self.rows],
            "min_gap_linear": float(self.min_gap_linear),
            "i_min_linear": int(self.i_min_linear),
            "min_gap_optimized": float(self.min_gap_optimized),
            "i_min_optimized": int(self.i_min_optimized),
        }


def compare_spo(inst: QuboInstance, T_list, method: str = "convex",
                config=None, N: int = 50, f_bound: float | None = None,
                slew: float = 2.5, substeps_per_interval: int | None = None,
                threads: int = 1,
                optimized_schedule: Schedule | None = None) -> SpoComparison:
    """Success probability of the optimized schedule versus linear, across anneal times.

    Requires the linear schedule's global minimum gap to sit strictly inside
    the anneal; endpoint-limited instances gain nothing from path
    optimization. A precomputed optimized schedule may be supplied to skip
    the solve.
    """
    T_list = [float(T) for T in T_list]
    if not T_list or any(T <= 0 for T in T_list):
        raise ValueError("T_list must be nonempty with positive entries")
    fb = inst.coupling_scale() if f_bound is None else f_bound
    linear = linear_schedule(inst.n_qubits, N, fb, slew)
    profile = gap_profile(inst, linear, k=2, threads=threads)
    g_full, i_full = min_gap(profile, scope="full")
    if i_full in (0, N):
        raise ValueError("instance's minimum gap sits at an anneal endpoint; "
                         "schedule path optimization cannot move it")
    report = None
    if optimized_schedule is not None:
        sched = optimized_schedule
    elif method == "convex":
        cfg = config or ConvexConfig(f_bound=fb, slew=slew, N=N)
        sched, report = optimize_convex(inst, cfg, threads=threads)
    elif method == "direct":
        cfg = config or DirectConfig()
        sched, report = optimize_direct(inst, linear, cfg, threads=threads)
    else:
        raise ValueError(f"method must be 'convex' or 'direct', got {method!r}")
    opt_profile = gap_profile(inst, sched, k=2, threads=threads)
    g_lin, i_lin = min_gap(profile, scope="interior")
    g_opt, i_opt = min_gap(opt_profile, scope="interior")

    def row(T: float) -> tuple[float, float, float]:
        p_lin = evolve(inst, linear, T, substeps_per_interval).p_succ
        p_opt = evolve(inst, sched, T, substeps_per_interval).p_succ
        return (T, p_lin, p_opt)

    rows = parallel_map(row, T_list, threads=threads)
    return SpoComparison(method=method, rows=rows,
                         min_gap_linear=g_lin, i_min_linear=i_lin,
                         min_gap_optimized=g_opt, i_min_optimized=i_opt,
                         schedule=sched, report=report)


def epsilon_sweep(inst: QuboInstance, eps_list, f_bound: float | None = None,
                  N: int = 50, config: ConvexConfig | None = None,
                  threads: int = 1) -> list[tuple[float, float]]:
    """Full-grid min gap reached by the convex solver as the slew budget grows.

    eps_list must be strictly increasing and positive; a looser slew budget
    enlarges the feasible set, so the attained min gap should be nondecreasing
    up to solver tolerance. The reported value is the minimum gap over the
    whole grid including the schedule-independent endpoints: once the interior
    has been lifted past min{gap(0), gap(N)} the anneal's bottleneck is the
    endpoints, so the sweep saturates exactly there instead of wobbling with
    whatever interior overshoot a given run happens to stop at.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(b <= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly increasing and positive")
    fb = inst.coupling_scale() if f_bound is None else f_bound
    out = []
    for eps in eps_list:
        base = config or ConvexConfig()
        cfg = ConvexConfig(p=base.p, eta=base.eta, xi=base.xi, max_outer=base.max_outer,
                           lmi_tol=base.lmi_tol, max_cut_rounds=base.max_cut_rounds,
                           eta_floor=base.eta_floor, f_bound=fb, slew=eps, N=N)
        _, report = optimize_convex(inst, cfg, threads=threads)
        out.append((eps, float(min(report.final_min_gap, report.endpoint_gap_floor))))
    return out


def _scan_instances(n: int, count: int, seed: int, predicate, N: int,
                    slew: float, threads: int, max_draws: int,
                    what: str) -> list[QuboInstance]:
    """First `count` random instances (in derived-seed order) whose linear-schedule
    spectral profile satisfies `predicate`. Deterministic and prefix-stable in
    seed: raising count only appends."""
    out: list[QuboInstance] = []
    batch = 0
    while len(out) < count and batch * 64 < max_draws:
        seeds = derive_seeds(seed, 64 * (batch + 1))[64 * batch:]
        for s in seeds:
            inst = random_instance(n, s)
            sched = linear_schedule(n, N, max(inst.coupling_scale(), 1.0), slew)
            profile = gap_profile(inst, sched, k=2, threads=threads)
            if predicate(profile):
                out.append(inst)
                if len(out) == count:
                    break
        batch += 1
    if len(out) < count:
        raise RuntimeError(f"found only {len(out)} {what} instances "
                           f"in {max_draws} draws")
    return out


def find_interior_min_instances(n: int, count: int, seed: int, N: int = 50,
                                slew: float = 2.5, threads: int = 1,
                                max_draws: int = 100000) -> list[QuboInstance]:
    """First `count` random instances (by derived seed order) whose linear-schedule
    global minimum gap is strictly interior. Deterministic in seed."""
    def interior(profile) -> bool:
        _, i_full = min_gap(profile, scope="full")
        return i_full not in (0, profile.gaps.size - 1)

    return _scan_instances(n, count, seed, interior, N, slew, threads, max_draws,
                           "interior-minimum")


def find_liftable_instances(n: int, count: int, seed: int, N: int = 50,
                            slew: float = 2.5, max_interior_gap: float = 0.5,
                            min_endpoint_floor: float = 1.0, threads: int = 1,
                            max_draws: int = 100000) -> list[QuboInstance]:
    """Instances where schedule optimization has real headroom.

    Selects instances whose linear-schedule global minimum gap is strictly
    interior AND at most max_interior_gap, while the schedule-independent
    endpoint gaps min{gap(0), gap(N)} stay at least min_endpoint_floor. On
    such instances the linear path is a genuine bottleneck (small interior
    gap) yet the achievable ceiling is high, so an optimizer that pushes the
    minimum toward the endpoints changes the physics materially.
    """
    def liftable(profile) -> bool:
        g_full, i_full = min_gap(profile, scope="full")
        N_grid = profile.gaps.size - 1
        if i_full in (0, N_grid):
            return False
        floor = min(float(profile.gaps[0]), float(profile.gaps[N_grid]))
        return g_full <= max_interior_gap and floor >= min_endpoint_floor

    return _scan_instances(n, count, seed, liftable, N, slew, threads, max_draws,
                           "liftable")
