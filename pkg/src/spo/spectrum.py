"""Spectral profiles of an annealing family along its schedule grid.

Everything downstream (both optimizers, the success-probability comparisons,
the hardness miner) consumes the same object: the k lowest eigenpairs of H(i)
at every grid point, with eigenvector phases aligned along the path so
consecutive ground-state overlaps are real and nonnegative.

Solver policy: dense LAPACK (scipy.linalg.eigh) is the mandatory path up to
n = 12 qubits; the Lanczos path (ARPACK with a deterministic start vector) is
the optional large-n route. Both are wrapped with residual and orthonormality
checks so a silent misconvergence cannot leak into gap values.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._util import atomic_write_text, format_sig, parallel_map
from .errors import EigensolverError
from .pauli import HamiltonianFamily, PauliOperator, QuboInstance
from .schedule import Schedule, require_feasible

DENSE_MAX_QUBITS = 12      # dim 4096; dense LAPACK is the mandatory path here
RESIDUAL_RTOL = 1e-9
ORTHO_TOL = 1e-9
WEYL_SLACK = 1e-9


@dataclass
class SpectrumProfile:
    """Lowest-k eigendata at each grid point of one annealing path.

    eigenvalues has shape (N+1, k) ascending per row, eigenvectors has shape
    (N+1, dim, k), gaps is lambda_1 - lambda_0 per grid point.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gaps: np.ndarray

    @property
    def n_intervals(self) -> int:
        return self.eigenvalues.shape[0] - 1

    @property
    def k(self) -> int:
        return self.eigenvalues.shape[1]

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[1]

    @property
    def ground_states(self) -> np.ndarray:
        return self.eigenvectors[:, :, 0]


def _check_eigenpairs(mat, w: np.ndarray, V: np.ndarray, norm_bound: float,
                      where: str) -> None:
    res = mat @ V - V * w[np.newaxis, :]
    residual = float(np.max(np.sqrt(np.sum(np.abs(res) ** 2, axis=0))))
    tol = RESIDUAL_RTOL * max(norm_bound, 1e-300)
    if residual > tol:
        raise EigensolverError(
            f"{where}: eigenpair residual {residual:.3e} exceeds {tol:.3e}",
            residual=residual)
    gram = V.conj().T @ V
    ortho = float(np.max(np.abs(gram - np.eye(V.shape[1]))))
    if ortho > ORTHO_TOL:
        raise EigensolverError(
            f"{where}: eigenvector orthonormality defect {ortho:.3e} exceeds {ORTHO_TOL:.0e}",
            residual=ortho)


def _lowest_from_matrix(mat, k: int, norm_bound: float, method: str,
                        where: str = "eigensolve") -> tuple[np.ndarray, np.ndarray]:
    dim = mat.shape[0]
    if not (1 <= k <= dim):
        raise ValueError(f"k must be in [1, dim={dim}], got {k}")
    if method == "auto":
        method = "dense" if dim <= (1 << DENSE_MAX_QUBITS) else "lanczos"
    if method == "lanczos" and k >= dim - 1:
        method = "dense"  # ARPACK requires k < dim - 1
    if method == "dense":
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        w, V = sla.eigh(dense, subset_by_index=(0, k - 1))
    elif method == "lanczos":
        v0 = np.full(dim, 1.0 / np.sqrt(dim))
        try:
            w, V = spla.eigsh(mat, k=k, which="SA", v0=v0, maxiter=200 * dim)
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(f"{where}: ARPACK did not converge: {exc}") from exc
        order = np.argsort(w, kind="stable")
        w, V = w[order], V[:, order]
    else:
        raise ValueError(f"method must be 'auto', 'dense', or 'lanczos', got {method!r}")
    _check_eigenpairs(mat, w, V, norm_bound, where)
    return w, V


def lowest_eigenpairs(op: PauliOperator, k: int,
                      method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """k lowest eigenvalues (ascending) and matching orthonormal eigenvectors of op.

    Raises EigensolverError (with the achieved residual) if convergence or the
    residual check ||H v - l v|| <= 1e-9 ||H|| fails.
    """
    return _lowest_from_matrix(op.to_sparse(), k, op.coefficient_norm_bound(), method)


def _align_columns(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Flip/rotate each column of cur so its overlap with the same column of prev is >= 0."""
    out = cur.copy()
    for m in range(cur.shape[1]):
        z = np.vdot(prev[:, m], cur[:, m])
        if abs(z) > 1e-12:
            if np.iscomplexobj(out):
                out[:, m] *= np.conj(z) / abs(z)
            elif z < 0:
                out[:, m] *= -1.0
    return out


def profile_from_matrices(mats, k: int, norm_bounds=None, method: str = "auto",
                          threads: int = 1) -> SpectrumProfile:
    """Profile of an explicit matrix path mats[0..N] (each Hermitian, same dim).

    This is the core the instance-level gap_profile delegates to; having it
    public lets callers profile shifted or otherwise customized families.
    """
    mats = list(mats)
    if len(mats) < 3:
        raise ValueError(f"need at least 3 grid points (N >= 2), got {len(mats)}")
    if k < 2:
        raise ValueError(f"profiles need k >= 2 to carry a gap, got k={k}")
    if norm_bounds is None:
        norm_bounds = [_frobenius(m) for m in mats]

    def solve(i: int):
        return _lowest_from_matrix(mats[i], k, norm_bounds[i], method,
                                   where=f"grid point {i}")

    try:
        pairs = parallel_map(solve, range(len(mats)), threads=threads)
    except EigensolverError:
        raise
    eigenvalues = np.stack([w for w, _ in pairs])
    vec_dtype = np.result_type(*[V.dtype for _, V in pairs])
    eigenvectors = np.stack([V.astype(vec_dtype, copy=False) for _, V in pairs])
    for i in range(len(mats)):
        norms = np.sqrt(np.sum(np.abs(eigenvectors[i]) ** 2, axis=0))
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise EigensolverError(f"grid point {i}: eigenvector norms off unit "
                                   f"by {np.max(np.abs(norms - 1.0)):.3e}", grid_index=i)
    for i in range(1, len(mats)):
        eigenvectors[i] = _align_columns(eigenvectors[i - 1], eigenvectors[i])
    # Continuity sanity: eigenvalue moves are bounded by the matrix perturbation.
    for i in range(1, len(mats)):
        step = _frobenius(mats[i] - mats[i - 1]) + WEYL_SLACK
        moved = float(np.max(np.abs(eigenvalues[i] - eigenvalues[i - 1])))
        if moved > step:
            raise EigensolverError(
                f"grid point {i}: eigenvalue moved {moved:.6e} but the matrix "
                f"changed only {step:.6e}; eigensolve inconsistent", grid_index=i)
    gaps = eigenvalues[:, 1] - eigenvalues[:, 0]
    return SpectrumProfile(eigenvalues=eigenvalues, eigenvectors=eigenvectors, gaps=gaps)


def _frobenius(mat) -> float:
    if sp.issparse(mat):
        return float(np.linalg.norm(mat.data)) if mat.nnz else 0.0
    return float(np.linalg.norm(np.asarray(mat)))


def gap_profile(inst: QuboInstance, sched: Schedule, k: int = 6,
                method: str = "auto", threads: int = 1) -> SpectrumProfile:
    """SpectrumProfile of H(i) for i = 0..N along the given feasible schedule."""
    if sched.n_qubits != inst.n_qubits:
        raise ValueError(f"schedule is for n={sched.n_qubits}, instance has n={inst.n_qubits}")
    require_feasible(sched)
    family = HamiltonianFamily(inst)
    N = sched.n_intervals
    mats = [family.matrix_at(sched, i) for i in range(N + 1)]
    bounds = [family.norm_bound_at(sched, i) for i in range(N + 1)]
    return profile_from_matrices(mats, k, norm_bounds=bounds, method=method, threads=threads)


def min_gap(profile: SpectrumProfile, scope: str = "interior") -> tuple[float, int]:
    """(smallest gap, its grid index); ties resolve to the smallest index.

    scope="interior" searches i = 1..N-1, scope="full" searches i = 0..N.
    """
    if scope == "interior":
        lo, hi = 1, profile.n_intervals
    elif scope == "full":
        lo, hi = 0, profile.n_intervals + 1
    else:
        raise ValueError(f"scope must be 'interior' or 'full', got {scope!r}")
    window = profile.gaps[lo:hi]
    idx = int(np.argmin(window)) + lo
    return float(profile.gaps[idx]), idx


def ground_fidelity_profile(profile: SpectrumProfile) -> np.ndarray:
    """|<u0(i) | u0(i+1)>| for i = 0..N-1; values near 1 mean the tracked state is smooth."""
    g = profile.ground_states
    return np.abs(np.einsum("id,id->i", g[:-1].conj(), g[1:]))


def adiabatic_condition(profile: SpectrumProfile, inst: QuboInstance, sched: Schedule,
                        mode: str = "worst_case"):
    """Finite-difference adiabatic-condition diagnostic along the path.

    dH/ds is approximated by the forward difference (H(i+1) - H(i)) * N on the
    intervals i = 0..N-1 (backward difference reused at i = N in local mode).

    mode="worst_case" returns the scalar max_i |<u1|dH|u0>| / min_i gap(i)^2
    with both extrema taken over the difference grid i = 0..N-1.
    mode="local" returns, per grid point, sum_m |<um|dH|u0>| / (lm - l0)^2 over
    the excited levels m = 1..k-1 carried by the profile.
    """
    if profile.k < 2:
        raise ValueError("adiabatic_condition needs a profile with k >= 2")
    family = HamiltonianFamily(inst)
    N = sched.n_intervals
    if profile.n_intervals != N:
        raise ValueError("profile and schedule disagree on the grid size")
    dmats = [(family.matrix_at(sched, i + 1) - family.matrix_at(sched, i)) * N
             for i in range(N)]
    if mode == "worst_case":
        nums = np.empty(N)
        for i in range(N):
            u0 = profile.eigenvectors[i, :, 0]
            u1 = profile.eigenvectors[i, :, 1]
            nums[i] = abs(np.vdot(u1, dmats[i] @ u0))
        den = float(np.min(profile.gaps[:N]) ** 2)
        return float(np.max(nums)) / den
    if mode == "local":
        out = np.empty(N + 1)
        for i in range(N + 1):
            D = dmats[min(i, N - 1)]
            u0 = profile.eigenvectors[i, :, 0]
            Du0 = D @ u0
            total = 0.0
            for m in range(1, profile.k):
                um = profile.eigenvectors[i, :, m]
                denom = (profile.eigenvalues[i, m] - profile.eigenvalues[i, 0]) ** 2
                total += abs(np.vdot(um, Du0)) / denom
            out[i] = total
        return out
    raise ValueError(f"mode must be 'worst_case' or 'local', got {mode!r}")


def write_profile_csv(profile: SpectrumProfile, path: str) -> None:
    """CSV with header i,s,lambda0,...,lambda{k-1},gap."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    N, k = profile.n_intervals, profile.k
    w.writerow(["i", "s"] + [f"lambda{m}" for m in range(k)] + ["gap"])
    for i in range(N + 1):
        w.writerow([i, format_sig(i / N)]
                   + [format_sig(v, 12) for v in profile.eigenvalues[i]]
                   + [format_sig(profile.gaps[i], 12)])
    atomic_write_text(path, buf.getvalue())
