"""Iterative convex approximation for maximizing the interior spectral gap.

Each outer iteration linearizes the nonconvex maximin-gap problem around the
incumbent schedule A_hat using its eigenvectors:

  * a scalar Rayleigh-quotient constraint  eps0(i) >= <u0(i)| H(i;A) |u0(i)>
    gives a certified upper bound on the ground energy for any A, and
  * a semidefinite constraint  Phi1(i)^T (H(i;A) - eps1(i) I) Phi1(i) >= 0
    over the incumbent's first p excited eigenvectors pushes eps1(i) below
    the restricted spectrum, approximating a lower bound on lambda_1.

Maximizing t <= min_i (eps1(i) - eps0(i)) subject to those constraints, the
schedule feasibility box, the slew rows, and a trust region
||A - A_hat||_inf <= eta is then a linear program once the semidefinite
constraint is enforced by spectral cutting planes: the matrix constraint holds
iff w^T (H - eps1) w >= 0 for every w = Phi1 v, and every violated eigenvector
of a block yields one scalar LP row. The LP value is an upper bound (it solves
a relaxation); each LP iterate is certified by recomputing the exact bound
values at its A (primal recovery), and the loop stops when the duality gap
closes to the relative objective tolerance or no cut is violated. The LP core
is HiGHS (scipy.optimize.linprog); the cut generation, primal recovery, trust
region management, and outer accept/shrink loop live here.

Outer loop policy: a trial is accepted only if the true interior min gap
(recomputed exactly) improves; otherwise eta is halved. Stopping: interior min
gap within xi of the endpoint gap floor min{gap(0), gap(N)}, accepted
improvement below xi, eta underflow, or the iteration cap.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt

from .direct import project_feasible
from .errors import SubproblemError
from .pauli import HamiltonianFamily, QuboInstance
from .schedule import Schedule, linear_schedule, require_feasible
from .spectrum import SpectrumProfile, gap_profile, min_gap

LP_OPTIONS = {"primal_feasibility_tolerance": 1e-8,
              "dual_feasibility_tolerance": 1e-8}


@dataclass
class ConvexConfig:
    p: int = 5                 # excited-subspace truncation rank
    eta: float | None = None   # trust-region radius; default 0.1 * f_bound
    xi: float = 1e-4           # stopping tolerance on gap improvement / endpoint floor
    max_outer: int = 100
    lmi_tol: float = 1e-8      # matrix-constraint violation tolerance
    max_cut_rounds: int = 60
    eta_floor: float = 1e-3    # stop once eta < eta_floor * initial eta
    f_bound: float | None = None  # default max(|h|, |J|) of the instance
    slew: float = 2.5
    N: int = 50

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.eta is not None and not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.max_outer < 1 or self.max_cut_rounds < 1:
            raise ValueError("iteration caps must be >= 1")
        if not self.lmi_tol > 0:
            raise ValueError(f"lmi_tol must be positive, got {self.lmi_tol}")
        if not 0 < self.eta_floor <= 1:
            raise ValueError(f"eta_floor must be in (0, 1], got {self.eta_floor}")
        if self.f_bound is not None and not self.f_bound > 0:
            raise ValueError(f"f_bound must be positive, got {self.f_bound}")
        if not self.slew > 0:
            raise ValueError(f"slew must be positive, got {self.slew}")
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")


@dataclass
class Projectors:
    """Incumbent eigenvector blocks per interior grid point i = 1..N-1.

    phi0[l] is the ground state, phi1[l] the (dim, p) excited block, and
    lam[l] the p+1 lowest eigenvalues, all at interior point l+1.
    """
    phi0: np.ndarray
    phi1: np.ndarray
    lam: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.phi0.shape[0]

    @property
    def p(self) -> int:
        return self.phi1.shape[2]


@dataclass
class SubproblemSolution:
    """One certified-feasible subproblem solution.

    eps0/eps1 are the exact bound values at A_star (Rayleigh quotient and
    block minimum eigenvalue), so the matrix constraint holds at A_star by
    construction. cut_count is the number of cutting planes added beyond the
    seeded rows; upper_bound is the final LP relaxation value, so
    upper_bound - objective bounds the remaining suboptimality.
    """
    A_star: np.ndarray
    eps0: np.ndarray
    eps1: np.ndarray
    objective: float
    cut_count: int
    lmi_min_eig: float = 0.0
    upper_bound: float = float("nan")


@dataclass
class IterationRecord:
    iter: int
    surrogate_objective: float
    true_min_gap: float
    i_min: int
    cuts_added: int
    eta: float
    wall_time_s: float
    accepted: bool = False
    eps0_max_violation: float = 0.0  # max over i of lambda0(i) - eps0_hat(i) at A_hat
    eps1_max_violation: float = 0.0  # max over i of eps1_hat(i) - lambda1(i) at A_hat
    lmi_min_eig: float = 0.0         # most negative constraint-block eigenvalue at A_star
    improvement: float = 0.0         # true-gap gain of an accepted step (0 if rejected)
    floor_slack: float = float("nan")  # endpoint gap floor minus this trial's min gap

    def to_json_dict(self) -> dict:
        return {
            "iter": int(self.iter),
            "surrogate_objective": float(self.surrogate_objective),
            "true_min_gap": float(self.true_min_gap),
            "i_min": int(self.i_min),
            "cuts_added": int(self.cuts_added),
            "eta": float(self.eta),
            "wall_time_s": float(self.wall_time_s),
        }


@dataclass
class ConvexReport:
    iterations: list[IterationRecord] = field(default_factory=list)
    final_min_gap: float = float("nan")
    i_min: int = -1
    endpoint_gap_floor: float = float("nan")
    best_case_already: bool = False
    termination: str = ""
    wall_time_s: float = 0.0


def build_projectors(inst: QuboInstance, sched_hat: Schedule, p: int,
                     profile: SpectrumProfile | None = None,
                     threads: int = 1) -> Projectors:
    """Eigenvector blocks of the incumbent at every interior grid point.

    p is clamped to dim-1. A precomputed profile of sched_hat (with k >= p+1)
    may be passed to avoid a second eigensolve sweep.
    """
    require_feasible(sched_hat)
    dim = 1 << inst.n_qubits
    p_eff = min(p, dim - 1)
    if p_eff < 1:
        raise ValueError(f"p must be >= 1, got effective p={p_eff}")
    if profile is None:
        profile = gap_profile(inst, sched_hat, k=p_eff + 1, threads=threads)
    if profile.k < p_eff + 1:
        raise ValueError(f"profile carries k={profile.k} levels, need >= {p_eff + 1}")
    N = sched_hat.n_intervals
    interior = slice(1, N)
    phi0 = profile.eigenvectors[interior, :, 0].copy()
    phi1 = profile.eigenvectors[interior, :, 1:p_eff + 1].copy()
    lam = profile.eigenvalues[interior, :p_eff + 1].copy()
    for l in range(phi0.shape[0]):
        block = np.concatenate([phi0[l][:, None], phi1[l]], axis=1)
        gram = block.conj().T @ block
        if np.max(np.abs(gram - np.eye(p_eff + 1))) > 1e-9:
            raise SubproblemError(f"projector columns at interior point {l + 1} "
                                  "are not orthonormal")
    return Projectors(phi0=phi0, phi1=phi1, lam=lam)


class _Blocks:
    """Expectations of the fixed and control operators in the incumbent's eigenbasis."""

    def __init__(self, family: HamiltonianFamily, proj: Projectors, N: int):
        n_int = proj.n_interior
        if n_int != N - 1:
            raise ValueError(f"projectors cover {n_int} interior points, schedule has {N - 1}")
        M = family.m_terms
        p = proj.p
        self.N, self.M, self.p = N, M, p
        self.c0 = np.empty(n_int)                 # <u0|C(i)|u0>
        self.q0 = np.empty((M, n_int))            # <u0|B_j|u0>
        self.P1C = np.empty((n_int, p, p))        # Phi1^T C(i) Phi1
        self.P1B = np.empty((n_int, M, p, p))     # Phi1^T B_j Phi1
        S0, S1 = family._s0, family._s1
        for l in range(n_int):
            i = l + 1
            f1 = i / N
            f0 = 1.0 - f1
            u0 = proj.phi0[l]
            U = proj.phi1[l]
            self.c0[l] = (f0 * np.vdot(u0, S0 @ u0) + f1 * np.vdot(u0, S1 @ u0)).real
            self.q0[:, l] = family.local_expectations(u0)
            self.P1C[l] = (f0 * (U.conj().T @ (S0 @ U))
                           + f1 * (U.conj().T @ (S1 @ U))).real
            for j, S in enumerate(family._sl):
                self.P1B[l, j] = (U.conj().T @ (S @ U)).real

    def excited_block(self, l: int, a_col: np.ndarray) -> np.ndarray:
        """Phi1^T H(i; A) Phi1 at interior point l+1 for control column a_col."""
        return self.P1C[l] + np.tensordot(a_col, self.P1B[l], axes=(0, 0))

    def incumbent_bounds(self, A_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(eps0_hat, eps1_hat) evaluated at the incumbent's own control values."""
        n_int = self.c0.size
        eps0 = self.c0 + np.einsum("jl,jl->l", self.q0, A_hat)
        eps1 = np.empty(n_int)
        for l in range(n_int):
            eps1[l] = float(np.linalg.eigvalsh(self.excited_block(l, A_hat[:, l]))[0])
        return eps0, eps1


def _solve_lp_with_cuts(blocks: _Blocks, A_hat: np.ndarray, eta: float,
                        f_bound: float, slew: float,
                        cfg: ConvexConfig) -> SubproblemSolution:
    N, M, p = blocks.N, blocks.M, blocks.p
    n_int = N - 1
    ds = 1.0 / N
    d = slew * ds
    nvar = 1 + M * n_int + 2 * n_int
    off_a = 1
    off_e0 = 1 + M * n_int
    off_e1 = off_e0 + n_int

    def a_idx(j: int, l: int) -> int:
        return off_a + l * M + j

    c_obj = np.zeros(nvar)
    c_obj[0] = -1.0  # maximize t

    bounds: list[tuple[float | None, float | None]] = [(None, None)] * nvar
    for l in range(n_int):
        for j in range(M):
            lo = max(-f_bound, A_hat[j, l] - eta)
            hi = min(f_bound, A_hat[j, l] + eta)
            if l == 0:            # slew against the zero boundary column at i = 0
                lo, hi = max(lo, -d), min(hi, d)
            if l == n_int - 1:    # slew against the zero boundary column at i = N
                lo, hi = max(lo, -d), min(hi, d)
            bounds[a_idx(j, l)] = (lo, hi)

    base_rows: list[np.ndarray] = []
    base_rhs: list[float] = []
    for l in range(n_int):  # t <= eps1 - eps0
        row = np.zeros(nvar)
        row[0] = 1.0
        row[off_e1 + l] = -1.0
        row[off_e0 + l] = 1.0
        base_rows.append(row)
        base_rhs.append(0.0)
    for l in range(n_int):  # eps0 >= Rayleigh quotient of the incumbent ground state
        row = np.zeros(nvar)
        for j in range(M):
            row[a_idx(j, l)] = blocks.q0[j, l]
        row[off_e0 + l] = -1.0
        base_rows.append(row)
        base_rhs.append(-blocks.c0[l])
    for l in range(n_int - 1):  # interior slew pairs
        for j in range(M):
            row = np.zeros(nvar)
            row[a_idx(j, l + 1)] = 1.0
            row[a_idx(j, l)] = -1.0
            base_rows.append(row)
            base_rhs.append(d)
            base_rows.append(-row)
            base_rhs.append(d)

    cut_rows: list[np.ndarray] = []
    cut_rhs: list[float] = []

    def add_cut(l: int, v: np.ndarray) -> None:
        # eps1(l) <= w^T C w + sum_j A[j,l] w^T B_j w  for w = Phi1(l) v
        row = np.zeros(nvar)
        row[off_e1 + l] = 1.0
        for j in range(M):
            row[a_idx(j, l)] = -float(v @ (blocks.P1B[l, j] @ v))
        cut_rows.append(row)
        cut_rhs.append(float(v @ (blocks.P1C[l] @ v)))

    for l in range(n_int):  # seed with the incumbent eigendirections: keeps the LP bounded
        for m in range(p):
            e = np.zeros(p)
            e[m] = 1.0
            add_cut(l, e)

    def certify(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Exact bound values at A: (eps0, eps1, objective). Always LMI-feasible."""
        eps0 = blocks.c0 + np.einsum("jl,jl->l", blocks.q0, A)
        eps1 = np.empty(n_int)
        for l in range(n_int):
            eps1[l] = float(np.linalg.eigh(blocks.excited_block(l, A[:, l]))[0][0])
        return eps0, eps1, float(np.min(eps1 - eps0))

    # The incumbent is the round-zero candidate, so the returned objective can
    # never trail the incumbent's own certified surrogate value.
    best_A = A_hat.copy()
    best_eps0, best_eps1, best_obj = certify(A_hat)
    added = 0
    upper = float("inf")
    stagnant = 0
    for _ in range(cfg.max_cut_rounds):
        A_ub = np.vstack(base_rows + cut_rows)
        b_ub = np.array(base_rhs + cut_rhs)
        res = sopt.linprog(c_obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds,
                           method="highs", options=LP_OPTIONS)
        if res.status != 0:
            raise SubproblemError(f"LP core failed (status {res.status}): {res.message}")
        x = res.x
        prev_upper, prev_best = upper, best_obj
        upper = min(upper, -float(res.fun))  # cut subset -> LP relaxes the true problem
        A_star = x[off_a:off_e0].reshape(n_int, M).T.copy()
        eps1_lp = x[off_e1:]
        eps0_c, eps1_c, obj_c = certify(A_star)
        if obj_c > best_obj:
            best_A, best_eps0, best_eps1, best_obj = A_star, eps0_c, eps1_c, obj_c
        if upper - best_obj <= 1e-7 * max(1.0, abs(upper)):
            break  # certified optimal within the relative objective tolerance
        if prev_upper - upper < 1e-10 and best_obj - prev_best < 1e-10:
            stagnant += 1
            if stagnant >= 8:
                break  # both bounds flat: further cuts only chase the degenerate face
        else:
            stagnant = 0
        new_cuts = 0
        for l in range(n_int):
            B = blocks.excited_block(l, A_star[:, l]) - eps1_lp[l] * np.eye(p)
            w, V = np.linalg.eigh(B)
            for m in range(p):
                if w[m] < -cfg.lmi_tol:
                    add_cut(l, V[:, m])  # strictly cuts the current LP optimum
                    new_cuts += 1
        if new_cuts == 0:
            break
        added += new_cuts
    lmi_min = 0.0
    for l in range(n_int):
        B = blocks.excited_block(l, best_A[:, l]) - best_eps1[l] * np.eye(p)
        lmi_min = min(lmi_min, float(np.linalg.eigvalsh(B)[0]))
    return SubproblemSolution(A_star=best_A, eps0=best_eps0, eps1=best_eps1,
                              objective=best_obj, cut_count=added,
                              lmi_min_eig=lmi_min, upper_bound=upper)


def solve_subproblem(inst: QuboInstance, projectors: Projectors, A_hat: np.ndarray,
                     cfg: ConvexConfig, eta: float | None = None,
                     f_bound: float | None = None, slew: float | None = None,
                     N: int | None = None) -> SubproblemSolution:
    """One trust-region LP around the incumbent control values A_hat (shape (M, N-1)).

    The incumbent is always feasible for its own subproblem, so the solution
    objective is checked to be >= the surrogate objective evaluated at A_hat.
    """
    f_bound = cfg.f_bound if f_bound is None else f_bound
    if f_bound is None:
        f_bound = inst.coupling_scale()
    slew = cfg.slew if slew is None else slew
    eta = (cfg.eta if cfg.eta is not None else 0.1 * f_bound) if eta is None else eta
    family = HamiltonianFamily(inst)
    A_hat = np.asarray(A_hat, dtype=np.float64)
    if A_hat.ndim != 2 or A_hat.shape[0] != family.m_terms:
        raise ValueError(f"A_hat must have shape (2n, N-1), got {A_hat.shape}")
    N = A_hat.shape[1] + 1 if N is None else N
    blocks = _Blocks(family, projectors, N)
    sol = _solve_lp_with_cuts(blocks, A_hat, eta, f_bound, slew, cfg)
    eps0_hat, eps1_hat = blocks.incumbent_bounds(A_hat)
    incumbent_obj = float(np.min(eps1_hat - eps0_hat))
    if sol.objective < incumbent_obj - 1e-7:
        raise SubproblemError(
            f"subproblem objective {sol.objective:.9e} fell below the incumbent's "
            f"{incumbent_obj:.9e}; LP model inconsistent")
    return sol


def optimize_convex(inst: QuboInstance, config: ConvexConfig | None = None,
                    threads: int = 1) -> tuple[Schedule, ConvexReport]:
    """Full outer loop from the linear schedule; returns the best schedule found.

    If the linear schedule's global minimum gap already sits at an endpoint
    there is nothing to gain (the endpoints are schedule-independent) and the
    loop exits immediately with best_case_already set.
    """
    cfg = config or ConvexConfig()
    f_bound = cfg.f_bound if cfg.f_bound is not None else inst.coupling_scale()
    if f_bound <= 0:
        raise ValueError(f"amplitude bound must be positive, got {f_bound}")
    eta0 = cfg.eta if cfg.eta is not None else 0.1 * f_bound
    N = cfg.N
    n = inst.n_qubits
    dim = 1 << n
    p_eff = min(cfg.p, dim - 1)
    k = p_eff + 1
    t_start = time.perf_counter()

    incumbent = linear_schedule(n, N, f_bound, cfg.slew)
    inc_profile = gap_profile(inst, incumbent, k=k, threads=threads)
    report = ConvexReport()
    report.endpoint_gap_floor = float(min(inc_profile.gaps[0], inc_profile.gaps[N]))
    _, full_idx = min_gap(inc_profile, scope="full")
    inc_min, inc_imin = min_gap(inc_profile, scope="interior")
    if full_idx in (0, N):
        report.best_case_already = True
        report.termination = "minimum_at_endpoint"
        report.final_min_gap = inc_min
        report.i_min = inc_imin
        report.wall_time_s = time.perf_counter() - t_start
        return incumbent, report

    family = HamiltonianFamily(inst)
    best_sched, best_min, best_imin = incumbent, inc_min, inc_imin
    eta = eta0
    A_hat = incumbent.values[:, 1:N].copy()
    projectors = build_projectors(inst, incumbent, p_eff, profile=inc_profile)
    blocks = _Blocks(family, projectors, N)
    termination = "max_outer"

    for it in range(cfg.max_outer):
        t_it = time.perf_counter()
        sol = _solve_lp_with_cuts(blocks, A_hat, eta, f_bound, cfg.slew, cfg)
        eps0_hat, eps1_hat = blocks.incumbent_bounds(A_hat)
        incumbent_obj = float(np.min(eps1_hat - eps0_hat))
        if sol.objective < incumbent_obj - 1e-7:
            raise SubproblemError(
                f"iteration {it}: subproblem objective {sol.objective:.9e} fell below "
                f"the incumbent's {incumbent_obj:.9e}")
        lam0 = projectors.lam[:, 0]
        lam1 = projectors.lam[:, 1]
        eps0_viol = float(np.max(lam0 - eps0_hat))
        eps1_viol = float(np.max(eps1_hat - lam1))
        if eps0_viol > 1e-8 or eps1_viol > 1e-8:
            raise SubproblemError(
                f"iteration {it}: incumbent bound check failed "
                f"(eps0 defect {eps0_viol:.3e}, eps1 defect {eps1_viol:.3e})")

        # the LP honors the caps only up to its feasibility tolerance, which
        # dominates when slew/N is tiny; snap onto the exact polytope first
        A_trial = project_feasible(sol.A_star, f_bound, cfg.slew, 1.0 / N)
        trial_values = np.zeros((2 * n, N + 1))
        trial_values[:, 1:N] = A_trial
        trial = Schedule(n, trial_values, f_bound, cfg.slew)
        trial_profile = gap_profile(inst, trial, k=k, threads=threads)
        trial_min, trial_imin = min_gap(trial_profile, scope="interior")

        rec = IterationRecord(
            iter=it, surrogate_objective=sol.objective, true_min_gap=trial_min,
            i_min=trial_imin, cuts_added=sol.cut_count, eta=eta,
            wall_time_s=time.perf_counter() - t_it,
            eps0_max_violation=eps0_viol, eps1_max_violation=eps1_viol,
            lmi_min_eig=sol.lmi_min_eig,
            floor_slack=report.endpoint_gap_floor - trial_min)
        report.iterations.append(rec)

        if trial_min > inc_min:
            rec.accepted = True
            improvement = trial_min - inc_min
            rec.improvement = improvement
            incumbent, inc_profile = trial, trial_profile
            inc_min, inc_imin = trial_min, trial_imin
            A_hat = A_trial.copy()
            projectors = build_projectors(inst, incumbent, p_eff, profile=inc_profile)
            blocks = _Blocks(family, projectors, N)
            if inc_min > best_min:
                best_sched, best_min, best_imin = incumbent, inc_min, inc_imin
            if inc_min >= report.endpoint_gap_floor - cfg.xi:
                termination = "endpoint_floor"
                break
            if improvement < cfg.xi:
                termination = "stall"
                break
        else:
            eta *= 0.5  # the linearization overreached: shrink the trust region
            if eta < cfg.eta_floor * eta0:
                termination = "eta_floor"
                break

    report.termination = termination
    report.final_min_gap = best_min
    report.i_min = best_imin
    report.wall_time_s = time.perf_counter() - t_start
    return best_sched, report
