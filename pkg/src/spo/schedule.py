"""Annealing schedules on a uniform time grid.

A Schedule holds the M = 2n free intermediate amplitudes f_j(i) on the grid
s_i = i/N, i = 0..N. The fixed envelopes f_0 = 1 - s (driver) and f_1 = s
(final Hamiltonian) are not stored; they are implied by the grid. Feasibility
means: exact zeros at both boundary columns, |f_j(i)| <= f_bound entrywise,
and |f_j(i+1) - f_j(i)| <= slew * (1/N) per interval (checked with a +1e-12
absolute slack for float round-off).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._util import atomic_write_text, format_sig
from .errors import InstanceFormatError, ScheduleConstraintError

SLEW_SLACK = 1e-12

RESTRICTIONS = ("unrestricted", "all_positive", "all_negative",
                "x_pos_z_neg", "x_neg_z_pos")


class Violation(NamedTuple):
    constraint: str   # "boundary" | "amplitude" | "slew"
    term: int         # control index j (0-based row of values)
    grid_index: int   # grid point i (for slew: left endpoint of the interval)
    magnitude: float  # how far past the limit


@dataclass(frozen=True)
class Schedule:
    """Intermediate amplitudes f_j(i), shape (M, N+1), with their feasibility caps."""
    n_qubits: int
    values: np.ndarray
    f_bound: float
    slew: float

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != 2 * self.n_qubits:
            raise ValueError(
                f"values must have shape (2n, N+1) = ({2 * self.n_qubits}, N+1), "
                f"got {vals.shape}")
        if vals.shape[1] < 3:
            raise ValueError(f"need at least N = 2 intervals, got N = {vals.shape[1] - 1}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("schedule values must be finite")
        if self.f_bound < 0 or not np.isfinite(self.f_bound):
            raise ValueError(f"f_bound must be >= 0, got {self.f_bound}")
        if self.slew < 0 or not np.isfinite(self.slew):
            raise ValueError(f"slew must be >= 0, got {self.slew}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "f_bound", float(self.f_bound))
        object.__setattr__(self, "slew", float(self.slew))

    @property
    def m_terms(self) -> int:
        return self.values.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.values.shape[1] - 1

    @property
    def ds(self) -> float:
        return 1.0 / self.n_intervals

    def with_values(self, values: np.ndarray) -> "Schedule":
        return Schedule(self.n_qubits, values, self.f_bound, self.slew)


def validate(sched: Schedule) -> list[Violation]:
    """All boundary/amplitude/slew violations, empty list iff feasible."""
    out: list[Violation] = []
    vals = sched.values
    N = sched.n_intervals
    for j in range(sched.m_terms):
        for i in (0, N):
            if vals[j, i] != 0.0:
                out.append(Violation("boundary", j, i, abs(float(vals[j, i]))))
    over = np.abs(vals) - sched.f_bound
    for j, i in zip(*np.nonzero(over > 0)):
        out.append(Violation("amplitude", int(j), int(i), float(over[j, i])))
    limit = sched.slew * sched.ds + SLEW_SLACK
    diff = np.abs(np.diff(vals, axis=1)) - limit
    for j, i in zip(*np.nonzero(diff > 0)):
        out.append(Violation("slew", int(j), int(i), float(diff[j, i])))
    return out


def require_feasible(sched: Schedule) -> None:
    violations = validate(sched)
    if violations:
        raise ScheduleConstraintError(violations)


def linear_schedule(n: int, N: int, f_bound: float, slew: float) -> Schedule:
    """The all-zero (pure linear-interpolation) schedule."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if f_bound <= 0 or slew <= 0:
        raise ValueError(f"bounds must be positive, got f_bound={f_bound}, slew={slew}")
    return Schedule(n, np.zeros((2 * n, N + 1)), float(f_bound), float(slew))


@dataclass(frozen=True)
class PerturbationCoefficients:
    """Direction coefficients c for a quadratic-envelope perturbation.

    c has length 2n ordered [x_0, z_0, x_1, z_1, ...]; restriction names the
    sampling sign pattern the entries must respect.
    """
    c: np.ndarray
    restriction: str

    def __post_init__(self):
        c = np.array(self.c, dtype=np.float64)
        if c.ndim != 1 or c.size < 2 or c.size % 2 != 0:
            raise ValueError(f"c must be a flat array of even length 2n, got shape {c.shape}")
        if not np.all(np.isfinite(c)) or np.all(c == 0.0):
            raise ValueError("c must be finite and not identically zero")
        if self.restriction not in RESTRICTIONS:
            raise ValueError(f"unknown restriction {self.restriction!r}, "
                             f"expected one of {RESTRICTIONS}")
        x_part, z_part = c[0::2], c[1::2]
        ok = {
            "unrestricted": True,
            "all_positive": bool(np.all(c > 0)),
            "all_negative": bool(np.all(c < 0)),
            "x_pos_z_neg": bool(np.all(x_part > 0) and np.all(z_part < 0)),
            "x_neg_z_pos": bool(np.all(x_part < 0) and np.all(z_part > 0)),
        }[self.restriction]
        if not ok:
            raise ValueError(f"coefficients violate sign restriction {self.restriction!r}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n_qubits(self) -> int:
        return self.c.size // 2


def sample_coefficients(n: int, restriction: str, seed: int) -> PerturbationCoefficients:
    """Draw c uniformly per entry under the sign restriction (deterministic in seed).

    Signed magnitudes are uniform: unrestricted on [-1, 1), positive entries on
    (0, 1], negative entries on [-1, 0).
    """
    if restriction not in RESTRICTIONS:
        raise ValueError(f"unknown restriction {restriction!r}, expected one of {RESTRICTIONS}")
    rng = np.random.default_rng(int(seed))
    u = rng.random(2 * n)  # in [0, 1)
    c = np.empty(2 * n)
    pos = 1.0 - u          # in (0, 1]
    neg = u - 1.0          # in [-1, 0)
    if restriction == "unrestricted":
        c = 2.0 * u - 1.0
    elif restriction == "all_positive":
        c = pos
    elif restriction == "all_negative":
        c = neg
    elif restriction == "x_pos_z_neg":
        c[0::2], c[1::2] = pos[0::2], neg[1::2]
    else:  # x_neg_z_pos
        c[0::2], c[1::2] = neg[0::2], pos[1::2]
    return PerturbationCoefficients(c=c, restriction=restriction)


def quadratic_random_schedule(coeffs: PerturbationCoefficients, N: int,
                              f_bound: float, slew: float,
                              normalization: str = "norm_sq") -> Schedule:
    """f_j(i) = s_i (1 - s_i) * c_j / denom with s_i = i/N.

    denom is ||c||^2 by default; normalization="norm" divides by ||c|| instead.
    The envelope vanishes exactly at both endpoints. Raises
    ScheduleConstraintError if the result breaks the amplitude or slew caps
    (callers that sample c should catch and resample).
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if normalization not in ("norm_sq", "norm"):
        raise ValueError(f"normalization must be 'norm_sq' or 'norm', got {normalization!r}")
    c = coeffs.c
    nrm = float(np.linalg.norm(c))
    denom = nrm * nrm if normalization == "norm_sq" else nrm
    s = np.arange(N + 1) / N
    envelope = s * (1.0 - s)  # exactly 0.0 at i = 0 and i = N
    values = np.outer(c / denom, envelope)
    sched = Schedule(coeffs.n_qubits, values, float(f_bound), float(slew))
    require_feasible(sched)
    return sched


def write_schedule_csv(sched: Schedule, path: str) -> None:
    """CSV with header i,s,f_2,...,f_{M+1} and 9-significant-digit values.

    Column labels follow the interpolation-coefficient numbering in which the
    driver and final envelopes occupy slots 0 and 1, so the first free term is
    f_2.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    M, N = sched.m_terms, sched.n_intervals
    w.writerow(["i", "s"] + [f"f_{j + 2}" for j in range(M)])
    for i in range(N + 1):
        w.writerow([i, format_sig(i / N)] + [format_sig(v) for v in sched.values[:, i]])
    atomic_write_text(path, buf.getvalue())


def read_schedule_csv(path: str, f_bound: float | None = None,
                      slew: float | None = None) -> Schedule:
    """Parse a schedule CSV back into a Schedule.

    The file format carries no bound metadata, so unless given, f_bound and
    slew are inferred as the tightest caps consistent with the data.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InstanceFormatError(f"{path}: empty schedule file")
    header = rows[0]
    if len(header) < 3 or header[0] != "i" or header[1] != "s":
        raise InstanceFormatError(f"{path}: header must start with 'i,s,f_2,...', got {header!r}")
    M = len(header) - 2
    if M % 2 != 0:
        raise InstanceFormatError(f"{path}: expected an even number of f columns, got {M}")
    for j, name in enumerate(header[2:]):
        if name != f"f_{j + 2}":
            raise InstanceFormatError(f"{path}: column {j + 2} must be 'f_{j + 2}', got {name!r}")
    body = rows[1:]
    if len(body) < 3:
        raise InstanceFormatError(f"{path}: need at least 3 grid rows, got {len(body)}")
    values = np.zeros((M, len(body)))
    for r, row in enumerate(body):
        if len(row) != M + 2:
            raise InstanceFormatError(
                f"{path}: line {r + 2}: expected {M + 2} fields, got {len(row)}")
        try:
            idx = int(row[0])
            fields = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise InstanceFormatError(f"{path}: line {r + 2}: {exc}") from exc
        if idx != r:
            raise InstanceFormatError(f"{path}: line {r + 2}: grid index {idx}, expected {r}")
        values[:, r] = fields[1:]
    N = len(body) - 1
    if f_bound is None:
        f_bound = float(np.max(np.abs(values)))
    if slew is None:
        slew = float(np.max(np.abs(np.diff(values, axis=1)))) * N if N else 0.0
    sched = Schedule(M // 2, values, float(f_bound), float(slew))
    violations = validate(sched)
    if violations:
        raise ScheduleConstraintError(violations)
    return sched
