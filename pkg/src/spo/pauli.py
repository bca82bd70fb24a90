"""Pauli-string operators and Hamiltonians for transverse-field annealing of QUBO problems.

The annealing family interpolates between a transverse-field driver

    H_0 = sum_i sigma_x^i

whose ground state is |-><otimes n> with eigenvalue -n, and the diagonal cost
Hamiltonian obtained from a QUBO instance in Ising form

    H_1 = sum_i h_i sigma_z^i + sum_{i<j} J_ij sigma_z^i sigma_z^j.

At schedule step i of N the assembled Hamiltonian is

    H(i) = (1 - i/N) H_0 + (i/N) H_1 + sum_j f_j(i) B_j

where {B_j} is the local control basis [sigma_x^0, sigma_z^0, sigma_x^1, ...]
(M = 2n terms) and f_j are the free intermediate amplitudes of a Schedule.

Basis convention: qubit 0 is the most significant bit of the computational
basis index, and z = +1 corresponds to bit value 0. Realized matrices are
sparse CSR, real float64 unless a Y factor appears, and Hermitian by
construction (no symmetrization step).
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from ._util import atomic_write_text
from .errors import InstanceFormatError

AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class PauliTerm:
    """One weighted Pauli string: coefficient * prod of single-qubit factors.

    factors is a tuple of (qubit_index, axis) pairs with strictly increasing
    qubit indices; the empty tuple denotes the identity string.
    """
    coefficient: float
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        prev = -1
        for q, ax in self.factors:
            if ax not in AXES:
                raise ValueError(f"unknown Pauli axis {ax!r} (expected one of {AXES})")
            if not isinstance(q, (int, np.integer)) or q < 0:
                raise ValueError(f"qubit index must be a nonnegative integer, got {q!r}")
            if q <= prev:
                raise ValueError(
                    f"factor qubit indices must be strictly increasing, got {self.factors}")
            prev = q

    @property
    def has_y(self) -> bool:
        return any(ax == "Y" for _, ax in self.factors)

    def max_qubit(self) -> int:
        return self.factors[-1][0] if self.factors else -1


class PauliOperator:
    """A Hermitian operator given as a merged list of weighted Pauli strings.

    Terms with identical factor lists are merged at construction and exact-zero
    coefficients are dropped, so the term list is canonical. The sparse
    realization is built lazily and cached; the cache is guarded by a lock so
    concurrent realize calls from worker threads stay safe.
    """

    def __init__(self, n_qubits: int, terms: Iterable[PauliTerm]):
        if n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
        merged: dict[tuple, float] = {}
        for t in terms:
            if t.max_qubit() >= n_qubits:
                raise ValueError(
                    f"term {t.factors} touches qubit {t.max_qubit()} but n_qubits={n_qubits}")
            merged[t.factors] = merged.get(t.factors, 0.0) + float(t.coefficient)
        self.n_qubits = int(n_qubits)
        self.terms: tuple[PauliTerm, ...] = tuple(
            PauliTerm(c, f) for f, c in sorted(merged.items()) if c != 0.0)
        self._lock = threading.Lock()
        self._matrix = None

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def is_diagonal(self) -> bool:
        return all(ax == "Z" for t in self.terms for _, ax in t.factors)

    def coefficient_norm_bound(self) -> float:
        """sum |coefficient|: an upper bound on the spectral norm (Pauli strings are unitary)."""
        return float(sum(abs(t.coefficient) for t in self.terms))

    def _realize(self) -> sp.csr_matrix:
        dim = self.dim
        use_complex = any(t.has_y for t in self.terms)
        dtype = np.complex128 if use_complex else np.float64
        cols = np.arange(dim, dtype=np.int64)
        rows_parts, cols_parts, vals_parts = [], [], []
        for term in self.terms:
            amp = np.full(dim, term.coefficient, dtype=dtype)
            xmask = 0
            for q, ax in term.factors:
                shift = self.n_qubits - 1 - q
                if ax == "X":
                    xmask |= 1 << shift
                    continue
                sign = 1 - 2 * ((cols >> shift) & 1)  # +1 for bit 0, -1 for bit 1
                if ax == "Z":
                    amp *= sign
                else:  # Y = i * sign on the column bit, plus a flip
                    amp *= 1j * sign
                    xmask |= 1 << shift
            rows_parts.append(cols ^ xmask)
            cols_parts.append(cols)
            vals_parts.append(amp)
        if not vals_parts:
            return sp.csr_matrix((dim, dim), dtype=np.float64)
        coo = sp.coo_matrix(
            (np.concatenate(vals_parts),
             (np.concatenate(rows_parts), np.concatenate(cols_parts))),
            shape=(dim, dim))
        mat = coo.tocsr()  # duplicate (row, col) entries are summed here
        mat.sum_duplicates()
        return mat

    def to_sparse(self) -> sp.csr_matrix:
        m = self._matrix
        if m is None:
            with self._lock:
                if self._matrix is None:
                    self._matrix = self._realize()
                m = self._matrix
        return m

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def diagonal(self) -> np.ndarray:
        """Diagonal entries as a length-2^n vector; only defined for Z-only operators."""
        if not self.is_diagonal:
            raise ValueError("diagonal() requires a Z-only (diagonal) operator")
        dim = self.dim
        cols = np.arange(dim, dtype=np.int64)
        diag = np.zeros(dim)
        for term in self.terms:
            amp = np.full(dim, term.coefficient)
            for q, _ in term.factors:
                amp *= 1 - 2 * ((cols >> (self.n_qubits - 1 - q)) & 1)
            diag += amp
        return diag


@dataclass(frozen=True)
class QuboInstance:
    """An Ising-form QUBO instance: fields h (length n) and couplings J (strict upper triangle).

    Symmetric J input is accepted and folded into the upper triangle; nonzero
    diagonal entries are rejected (they are constant shifts, not couplings).
    Arrays are made read-only so instances behave as values.
    """
    n_qubits: int
    h: np.ndarray
    J: np.ndarray
    seed: int = 0

    def __post_init__(self):
        n = self.n_qubits
        if n < 1:
            raise ValueError(f"n_qubits must be >= 1, got {n}")
        h = np.asarray(self.h, dtype=np.float64)
        J = np.array(self.J, dtype=np.float64)  # copy: we may fold in place
        if h.shape != (n,):
            raise ValueError(f"h must have shape ({n},), got {h.shape}")
        if J.shape != (n, n):
            raise ValueError(f"J must have shape ({n}, {n}), got {J.shape}")
        if np.any(np.diagonal(J) != 0.0):
            raise ValueError("J diagonal must be zero")
        lower = np.tril(J, -1)
        if np.any(lower != 0.0):
            J = np.triu(J, 1) + lower.T  # fold symmetric input upward
        h = h.copy()
        h.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "seed", int(self.seed))

    def coupling_scale(self) -> float:
        """max(|h_i|, |J_ij|): the default amplitude bound for intermediate terms."""
        return float(max(np.max(np.abs(self.h)), np.max(np.abs(self.J))))


def random_instance(n: int, seed: int) -> QuboInstance:
    """Uniform random instance: h_i and J_ij (i<j) i.i.d. uniform on [-1, 1]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(int(seed))
    h = rng.uniform(-1.0, 1.0, size=n)
    J = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    J[iu, ju] = rng.uniform(-1.0, 1.0, size=iu.size)
    return QuboInstance(n_qubits=n, h=h, J=J, seed=int(seed))


def instance_to_dict(inst: QuboInstance) -> dict:
    pairs = []
    n = inst.n_qubits
    for i in range(n):
        for j in range(i + 1, n):
            v = float(inst.J[i, j])
            if v != 0.0:
                pairs.append([i, j, v])
    return {"n": n, "h": [float(x) for x in inst.h], "J": pairs, "seed": int(inst.seed)}


def instance_from_dict(data: dict) -> QuboInstance:
    if not isinstance(data, dict):
        raise InstanceFormatError(f"instance must be a JSON object, got {type(data).__name__}")
    for key in ("n", "h", "J"):
        if key not in data:
            raise InstanceFormatError(f"instance is missing required key {key!r}")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        raise InstanceFormatError(f"'n' must be a positive integer, got {n!r}")
    h = data["h"]
    if not isinstance(h, list) or len(h) != n:
        raise InstanceFormatError(f"'h' must be a list of length n={n}, got length "
                                  f"{len(h) if isinstance(h, list) else '<not a list>'}")
    try:
        h_arr = np.array([float(x) for x in h])
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"'h' entries must be numbers: {exc}") from exc
    J = np.zeros((n, n))
    seen = set()
    for idx, entry in enumerate(data["J"]):
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise InstanceFormatError(f"J[{idx}] must be a triple [i, j, value], got {entry!r}")
        i, j, v = entry
        if not isinstance(i, int) or not isinstance(j, int):
            raise InstanceFormatError(f"J[{idx}] indices must be integers, got {entry!r}")
        if not (0 <= i < j < n):
            raise InstanceFormatError(
                f"J[{idx}] requires 0 <= i < j < n (n={n}), got (i={i}, j={j})")
        if (i, j) in seen:
            raise InstanceFormatError(f"J[{idx}] duplicates pair (i={i}, j={j})")
        seen.add((i, j))
        try:
            J[i, j] = float(v)
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"J[{idx}] value must be a number: {exc}") from exc
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise InstanceFormatError(f"'seed' must be a nonnegative integer, got {seed!r}")
    return QuboInstance(n_qubits=n, h=h_arr, J=J, seed=seed)


def write_instance(inst: QuboInstance, path: str) -> None:
    atomic_write_text(path, json.dumps(instance_to_dict(inst), sort_keys=True,
                                       separators=(",", ": "), indent=1) + "\n")


def read_instance(path: str) -> QuboInstance:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return instance_from_dict(data)
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc


def build_driver_hamiltonian(n: int) -> PauliOperator:
    """H_0 = sum_i sigma_x^i. Ground state |-)^n with eigenvalue -n; spectral gap exactly 2."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return PauliOperator(n, [PauliTerm(1.0, ((q, "X"),)) for q in range(n)])


def build_final_hamiltonian(inst: QuboInstance) -> PauliOperator:
    """Diagonal Ising cost Hamiltonian of the instance."""
    terms = [PauliTerm(float(inst.h[i]), ((i, "Z"),))
             for i in range(inst.n_qubits) if inst.h[i] != 0.0]
    iu, ju = np.nonzero(inst.J)
    for i, j in zip(iu.tolist(), ju.tolist()):
        terms.append(PauliTerm(float(inst.J[i, j]), ((i, "Z"), (j, "Z"))))
    return PauliOperator(inst.n_qubits, terms)


def build_local_basis(n: int) -> list[PauliOperator]:
    """The M = 2n intermediate control operators [X_0, Z_0, X_1, Z_1, ...]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ops = []
    for q in range(n):
        ops.append(PauliOperator(n, [PauliTerm(1.0, ((q, "X"),))]))
        ops.append(PauliOperator(n, [PauliTerm(1.0, ((q, "Z"),))]))
    return ops


def assemble(inst: QuboInstance, sched, i: int) -> PauliOperator:
    """H(i) = (1 - i/N) H_0 + (i/N) H_1 + sum_j f_j(i) B_j as a merged operator.

    At i = 0 and i = N the intermediate amplitudes are exactly zero by the
    Schedule boundary invariant, so the result is exactly H_0 / H_1.
    """
    n = inst.n_qubits
    if sched.n_qubits != n:
        raise ValueError(f"schedule is for n={sched.n_qubits} qubits, instance has n={n}")
    N = sched.n_intervals
    if not (0 <= i <= N):
        raise ValueError(f"grid index must be in [0, {N}], got {i}")
    f1 = i / N
    f0 = 1.0 - f1
    terms: list[PauliTerm] = []
    if f0 != 0.0:
        terms.extend(PauliTerm(f0 * t.coefficient, t.factors)
                     for t in build_driver_hamiltonian(n).terms)
    if f1 != 0.0:
        terms.extend(PauliTerm(f1 * t.coefficient, t.factors)
                     for t in build_final_hamiltonian(inst).terms)
    basis = build_local_basis(n)
    for j, op in enumerate(basis):
        c = float(sched.values[j, i])
        if c != 0.0:
            terms.extend(PauliTerm(c * t.coefficient, t.factors) for t in op.terms)
    return PauliOperator(n, terms)


class HamiltonianFamily:
    """Realized driver/final/control matrices of one instance, for fast H(i) assembly.

    assemble() rebuilds the operator term list on every call, which is the
    clean contract but wasteful inside grid sweeps; this caches the fixed
    sparse pieces once and forms linear combinations.
    """

    def __init__(self, inst: QuboInstance):
        self.inst = inst
        self.n_qubits = inst.n_qubits
        self.driver = build_driver_hamiltonian(inst.n_qubits)
        self.final = build_final_hamiltonian(inst)
        self.locals = build_local_basis(inst.n_qubits)
        self._s0 = self.driver.to_sparse()
        self._s1 = self.final.to_sparse()
        self._sl = [op.to_sparse() for op in self.locals]

    @property
    def m_terms(self) -> int:
        return 2 * self.n_qubits

    def matrix(self, f0: float, f1: float, coeffs: Sequence[float]) -> sp.csr_matrix:
        """H = f0*H_0 + f1*H_1 + sum_j coeffs[j]*B_j as sparse CSR."""
        if len(coeffs) != self.m_terms:
            raise ValueError(f"expected {self.m_terms} control amplitudes, got {len(coeffs)}")
        H = f0 * self._s0 + f1 * self._s1
        for c, S in zip(coeffs, self._sl):
            if c != 0.0:
                H = H + c * S
        return H

    def matrix_at(self, sched, i: int) -> sp.csr_matrix:
        N = sched.n_intervals
        return self.matrix(1.0 - i / N, i / N, sched.values[:, i])

    def norm_bound_at(self, sched, i: int) -> float:
        """Triangle-inequality bound on ||H(i)||_2 from the coefficient magnitudes."""
        N = sched.n_intervals
        f1 = i / N
        return ((1.0 - f1) * self.driver.coefficient_norm_bound()
                + f1 * self.final.coefficient_norm_bound()
                + float(np.sum(np.abs(sched.values[:, i]))))

    def local_expectations(self, vec: np.ndarray) -> np.ndarray:
        """<vec| B_j |vec> for all M control operators."""
        return np.array([np.vdot(vec, S @ vec).real for S in self._sl])
