"""Direct maximin optimization of the interior spectral gap over schedule space.

The objective is the smallest interior gap min_{i=1..N-1} gap(i), a nonsmooth
concave-ish landscape. It is smoothed by the soft-min

    softmin_beta = -(1/beta) log sum_i exp(-beta * gap(i))

which satisfies softmin <= min <= softmin + log(N-1)/beta, and sharpened by a
continuation over increasing beta. Ascent steps follow the Hellmann-Feynman
gap derivative d gap(i) / d f_j(i) = <u1|B_j|u1> - <u0|B_j|u0>, projected back
onto the box + slew-rate feasible set by alternating clamp sweeps (the set is
an intersection of convex constraints, so the sweeps converge to a feasible
point). When the first excited level is degenerate the one-sided derivative
from the cluster block's smallest eigenvalue is used as the subgradient.

The returned schedule is the feasible iterate with the best true interior min
gap ever seen, so the result never trails the initial schedule.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._util import parallel_map
from .errors import DegenerateGapError
from .pauli import HamiltonianFamily, QuboInstance
from .schedule import Schedule, require_feasible, validate
from .spectrum import _lowest_from_matrix

DEGENERACY_TOL = 1e-8


@dataclass
class DirectConfig:
    """Knobs of the soft-min ascent; defaults are tuned for the n <= 8 desk scale."""
    betas: tuple[float, ...] = (10.0, 50.0, 250.0)
    max_iters_per_beta: int = 80
    grad_tol: float = 1e-7
    step_init: float = 0.25
    step_grow: float = 1.6
    step_shrink: float = 0.5
    min_step: float = 1e-10
    armijo: float = 1e-4
    k: int = 4                      # eigenpairs per grid point; >= 3 resolves excited clusters
    degeneracy_tol: float = DEGENERACY_TOL


@dataclass
class DirectReport:
    """objective_history holds the incumbent (best-so-far) interior min gap
    after iterate 0, 1, ...; it is nondecreasing by construction."""
    objective_history: list[float] = field(default_factory=list)
    final_min_gap: float = float("nan")
    i_min: int = -1
    wall_time_s: float = 0.0
    stall_flag: bool = False

    def to_dict(self) -> dict:
        return {
            "objective_history": [float(v) for v in self.objective_history],
            "final_min_gap": float(self.final_min_gap),
            "i_min": int(self.i_min),
            "wall_time_s": float(self.wall_time_s),
            "stall_flag": bool(self.stall_flag),
        }


def project_feasible(A: np.ndarray, f_bound: float, slew: float, ds: float,
                     max_sweeps: int = 2000) -> np.ndarray:
    """Map interior amplitudes A (shape (M, N-1)) into the box + slew feasible set.

    Alternating forward/backward clamp sweeps against the implicit zero
    boundary columns; each sweep only moves entries toward feasibility, and
    the set contains 0, so the iteration reaches a fixed point.
    """
    M, width = A.shape
    d = slew * ds
    v = np.zeros((M, width + 2))
    v[:, 1:-1] = np.clip(A, -f_bound, f_bound)
    for _ in range(max_sweeps):
        before = v[:, 1:-1].copy()
        for i in range(1, width + 1):      # forward: clamp against the left neighbor
            lo = v[:, i - 1] - d
            hi = v[:, i - 1] + d
            v[:, i] = np.clip(np.clip(v[:, i], lo, hi), -f_bound, f_bound)
        for i in range(width, 0, -1):      # backward: clamp against the right neighbor
            lo = v[:, i + 1] - d
            hi = v[:, i + 1] + d
            v[:, i] = np.clip(np.clip(v[:, i], lo, hi), -f_bound, f_bound)
        if np.max(np.abs(v[:, 1:-1] - before)) == 0.0:
            break
    return v[:, 1:-1].copy()


def gap_gradient(inst: QuboInstance, sched: Schedule, i: int, j: int) -> float:
    """d gap(i) / d f_j(i) by the Hellmann-Feynman identity at one grid point.

    Requires the gap to be open and the first excited level to be simple;
    otherwise the derivative is set-valued and DegenerateGapError is raised.
    """
    require_feasible(sched)
    N = sched.n_intervals
    if not (0 <= i <= N):
        raise ValueError(f"grid index must be in [0, {N}], got {i}")
    if not (0 <= j < sched.m_terms):
        raise ValueError(f"control index must be in [0, {sched.m_terms}), got {j}")
    family = HamiltonianFamily(inst)
    mat = family.matrix_at(sched, i)
    dim = mat.shape[0]
    k = min(dim, 3)
    w, V = _lowest_from_matrix(mat, k, family.norm_bound_at(sched, i), "auto",
                               where=f"grid point {i}")
    if w[1] - w[0] < DEGENERACY_TOL:
        raise DegenerateGapError(
            f"gap at grid point {i} is closed to within {DEGENERACY_TOL:.0e}; "
            "gap derivative undefined", grid_index=i, splitting=float(w[1] - w[0]))
    if k >= 3 and w[2] - w[1] < DEGENERACY_TOL:
        raise DegenerateGapError(
            f"first excited level at grid point {i} is degenerate "
            f"(splitting {w[2] - w[1]:.3e}); gap derivative is set-valued",
            grid_index=i, splitting=float(w[2] - w[1]))
    B = family.locals[j].to_sparse()
    u0, u1 = V[:, 0], V[:, 1]
    return float((np.vdot(u1, B @ u1) - np.vdot(u0, B @ u0)).real)


class _PointData:
    """Eigendata of one interior grid point, enough for value + subgradient."""
    __slots__ = ("gap", "u0", "excited")

    def __init__(self, gap: float, u0: np.ndarray, excited: np.ndarray):
        self.gap = gap
        self.u0 = u0
        self.excited = excited  # (dim, d): the first-excited cluster, d >= 1


def _solve_point(family: HamiltonianFamily, values: np.ndarray, N: int, i: int,
                 k0: int, tol: float) -> _PointData:
    f1 = i / N
    mat = family.matrix(1.0 - f1, f1, values[:, i])
    bound = ((1.0 - f1) * family.driver.coefficient_norm_bound()
             + f1 * family.final.coefficient_norm_bound()
             + float(np.sum(np.abs(values[:, i]))))
    dim = mat.shape[0]
    k = min(dim, max(3, k0))
    while True:
        w, V = _lowest_from_matrix(mat, k, bound, "auto", where=f"grid point {i}")
        # Excited cluster = all computed levels within tol of lambda_1. If the
        # cluster reaches the last computed level it may extend beyond k.
        cluster_end = 2
        while cluster_end < k and w[cluster_end] - w[1] < tol:
            cluster_end += 1
        if cluster_end == k and k < dim:
            k = min(dim, 2 * k)
            continue
        return _PointData(float(w[1] - w[0]), V[:, 0], V[:, 1:cluster_end])


def _softmin(gaps: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Shifted log-sum-exp soft minimum and its weights (sum to 1)."""
    m = float(np.min(gaps))
    e = np.exp(-beta * (gaps - m))
    total = float(np.sum(e))
    val = m - np.log(total) / beta
    assert val <= m + 1e-12 and m <= val + np.log(len(gaps)) / beta + 1e-12
    return val, e / total


def optimize_direct(inst: QuboInstance, init: Schedule, config: DirectConfig | None = None,
                    threads: int = 1) -> tuple[Schedule, DirectReport]:
    """Maximize the interior min gap by projected soft-min ascent from init.

    Returns the best feasible schedule encountered plus a DirectReport. The
    best-seen true min gap is monotone in the initial value by construction.
    """
    cfg = config or DirectConfig()
    if init.n_qubits != inst.n_qubits:
        raise ValueError(f"init schedule is for n={init.n_qubits}, instance n={inst.n_qubits}")
    require_feasible(init)
    family = HamiltonianFamily(inst)
    N = init.n_intervals
    M = init.m_terms
    ds = init.ds
    t0 = time.perf_counter()

    def evaluate(A: np.ndarray) -> tuple[np.ndarray, list[_PointData]]:
        values = np.zeros((M, N + 1))
        values[:, 1:N] = A
        pts = parallel_map(
            lambda i: _solve_point(family, values, N, i, cfg.k, cfg.degeneracy_tol),
            range(1, N), threads=threads)
        return np.array([p.gap for p in pts]), pts

    def subgradient(pts: list[_PointData], weights: np.ndarray) -> np.ndarray:
        G = np.zeros((M, N - 1))
        for idx, p in enumerate(pts):
            if weights[idx] == 0.0:
                continue
            e0 = family.local_expectations(p.u0)
            if p.excited.shape[1] == 1:
                e1 = family.local_expectations(p.excited[:, 0])
            else:
                # Degenerate excited cluster: one-sided derivative from the
                # smallest eigenvalue of each control's cluster block.
                U = p.excited
                e1 = np.empty(M)
                for j, S in enumerate(family._sl):
                    block = U.conj().T @ (S @ U)
                    e1[j] = float(np.linalg.eigvalsh(block)[0])
            G[:, idx] += weights[idx] * (e1 - e0)
        return G

    A = init.values[:, 1:N].copy()
    gaps, pts = evaluate(A)
    best_min = float(np.min(gaps))
    best_idx = int(np.argmin(gaps)) + 1
    best_A = A.copy()
    report = DirectReport(objective_history=[best_min])

    last_reason = "max_iters"
    for beta in cfg.betas:
        step = cfg.step_init
        last_reason = "max_iters"
        for _ in range(cfg.max_iters_per_beta):
            sm, weights = _softmin(gaps, beta)
            if np.any(gaps < cfg.degeneracy_tol):
                last_reason = "no_ascent"  # gap closed: derivative set-valued, stop
                break
            G = subgradient(pts, weights)
            if float(np.max(np.abs(G))) < cfg.grad_tol:
                last_reason = "grad_tol"
                break
            accepted = False
            while step >= cfg.min_step:
                A_new = project_feasible(A + step * G, init.f_bound, init.slew, ds)
                delta = A_new - A
                move = float(np.max(np.abs(delta)))
                predicted = float(np.sum(G * delta))
                if move == 0.0 or predicted <= 0.0:
                    break  # projection gives no usable ascent direction
                gaps_new, pts_new = evaluate(A_new)
                sm_new, _ = _softmin(gaps_new, beta)
                if sm_new >= sm + cfg.armijo * predicted:
                    A, gaps, pts = A_new, gaps_new, pts_new
                    step = min(step * cfg.step_grow, 4.0 * cfg.step_init)
                    accepted = True
                    break
                step *= cfg.step_shrink
            if not accepted:
                last_reason = "no_ascent"
                break
            true_min = float(np.min(gaps))
            if true_min > best_min:
                best_min = true_min
                best_idx = int(np.argmin(gaps)) + 1
                best_A = A.copy()
            # incumbent value: soft-min ascent lets the raw min wobble by up
            # to log(N-1)/beta, but the best-so-far objective never regresses
            report.objective_history.append(best_min)

    values = np.zeros((M, N + 1))
    values[:, 1:N] = best_A
    result = Schedule(init.n_qubits, values, init.f_bound, init.slew)
    assert not validate(result), "internal error: optimizer produced an infeasible schedule"
    report.final_min_gap = best_min
    report.i_min = best_idx
    report.stall_flag = (last_reason == "no_ascent")
    report.wall_time_s = time.perf_counter() - t0
    return result, report
