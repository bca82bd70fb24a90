"""Time-dependent Schrodinger evolution along a schedule and success probability.

The anneal of total time T is discretized piecewise-constantly on the schedule
grid: on interval i (i = 0..N-1) the state is propagated by exp(-i tau H(i))
with tau = T/N and H(i) the assembled Hamiltonian at the left grid point. The
exponential action is applied with scipy.sparse.linalg.expm_multiply; each
interval is split into substeps so that ||H|| * tau_sub <= 0.5 (spectral norm
estimated by power iteration) unless the caller overrides the substep count.
Since H is constant within an interval the substep split does not change the
applied operator, only the per-call norm budget.

Success probability is the population of the final Hamiltonian's ground
space: degenerate ground levels (within 1e-10 of the minimum) all count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import NormDriftError
from .pauli import HamiltonianFamily, QuboInstance
from .schedule import Schedule, require_feasible

DRIFT_TOL = 1e-8
GROUND_SPACE_TOL = 1e-10
SUBSTEP_NORM_BUDGET = 0.5


@dataclass
class EvolutionResult:
    final_state: np.ndarray
    p_succ: float
    norm_drift: float
    T: float
    steps: int


def driver_ground_state(n: int) -> np.ndarray:
    """|-)^(x n): amplitudes (-1)^popcount(z) / sqrt(2^n), the H_0 ground state."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    dim = 1 << n
    z = np.arange(dim)
    signs = 1.0 - 2.0 * (np.array([bin(v).count("1") for v in z]) % 2)
    return (signs / math.sqrt(dim)).astype(np.complex128)


def estimate_spectral_norm(mat, iters: int = 20) -> float:
    """Power-iteration estimate of ||H||_2 with a deterministic start vector."""
    dim = mat.shape[0]
    v = np.full(dim, 1.0 / math.sqrt(dim))
    nw = 0.0
    for _ in range(iters):
        w = mat @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
    return nw


def _substeps_for(mat, tau: float, override: int | None, multiplier: int = 1) -> int:
    if override is not None:
        if override < 1:
            raise ValueError(f"substeps override must be >= 1, got {override}")
        return int(override) * multiplier
    norm = estimate_spectral_norm(mat)
    return max(1, math.ceil(norm * tau / SUBSTEP_NORM_BUDGET)) * multiplier


def ground_space_probability(state: np.ndarray, inst: QuboInstance) -> float:
    """Population of the final (diagonal) Hamiltonian's ground space in state."""
    family = HamiltonianFamily(inst)
    diag = family.final.diagonal()
    lam0 = float(np.min(diag))
    mask = diag <= lam0 + GROUND_SPACE_TOL
    return float(np.sum(np.abs(state[mask]) ** 2))


def success_probability(result, inst: QuboInstance) -> float:
    """Ground-space population of an EvolutionResult (or a raw state vector)."""
    state = result.final_state if isinstance(result, EvolutionResult) else np.asarray(result)
    return ground_space_probability(state, inst)


def evolve(inst: QuboInstance, sched: Schedule, T: float,
           substeps_per_interval: int | None = None,
           substep_multiplier: int = 1) -> EvolutionResult:
    """Propagate the driver ground state through the schedule for total time T.

    substep_multiplier refines whatever per-interval substep count is in
    effect (override or norm-adaptive); running twice with multipliers 1 and 2
    gives a step-doubling self-convergence check. Raises NormDriftError if the
    final state norm strays from 1 by more than 1e-8 (the propagator is
    unitary, so drift means numerical failure).
    """
    if sched.n_qubits != inst.n_qubits:
        raise ValueError(f"schedule is for n={sched.n_qubits}, instance has "
                         f"n={inst.n_qubits}")
    if not (T > 0) or not np.isfinite(T):
        raise ValueError(f"total time T must be positive and finite, got {T}")
    if substep_multiplier < 1:
        raise ValueError(f"substep_multiplier must be >= 1, got {substep_multiplier}")
    require_feasible(sched)
    family = HamiltonianFamily(inst)
    N = sched.n_intervals
    tau = T / N
    psi = driver_ground_state(inst.n_qubits)
    steps = 0
    for i in range(N):
        H = family.matrix_at(sched, i)
        m = _substeps_for(H, tau, substeps_per_interval, substep_multiplier)
        A = (-1j * (tau / m)) * H
        for _ in range(m):
            psi = spla.expm_multiply(A, psi)
        steps += m
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if drift > DRIFT_TOL:
        raise NormDriftError(
            f"state norm drifted by {drift:.3e} (tolerance {DRIFT_TOL:.0e})", drift=drift)
    return EvolutionResult(final_state=psi, p_succ=ground_space_probability(psi, inst),
                           norm_drift=drift, T=float(T), steps=steps)


def evolve_dense_reference(inst: QuboInstance, sched: Schedule, T: float,
                           substeps_per_interval: int | None = None) -> EvolutionResult:
    """Reference integrator: dense scipy.linalg.expm per interval.

    Kept deliberately independent of the sparse expm-action path so the two
    can cross-check each other; practical only for small n.
    """
    if sched.n_qubits != inst.n_qubits:
        raise ValueError(f"schedule is for n={sched.n_qubits}, instance has "
                         f"n={inst.n_qubits}")
    if not (T > 0) or not np.isfinite(T):
        raise ValueError(f"total time T must be positive and finite, got {T}")
    require_feasible(sched)
    family = HamiltonianFamily(inst)
    N = sched.n_intervals
    tau = T / N
    psi = driver_ground_state(inst.n_qubits)
    steps = 0
    for i in range(N):
        H = family.matrix_at(sched, i).toarray()
        m = 1 if substeps_per_interval is None else int(substeps_per_interval)
        U = sla.expm(-1j * (tau / m) * H)
        for _ in range(m):
            psi = U @ psi
        steps += m
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if drift > DRIFT_TOL:
        raise NormDriftError(
            f"reference state norm drifted by {drift:.3e}", drift=drift)
    return EvolutionResult(final_state=psi, p_succ=ground_space_probability(psi, inst),
                           norm_drift=drift, T=float(T), steps=steps)
