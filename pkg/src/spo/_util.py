"""Small shared helpers: atomic file writes, deterministic parallel map, seed derivation."""
from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file + os.replace so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map fn over items, preserving input order in the result.

    threads <= 1 runs serially. Results are ordered by input index regardless of
    completion order, so output is deterministic either way (numpy/scipy release
    the GIL in the kernels that dominate here).
    """
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def derive_seed(*entropy: int) -> int:
    """Deterministic 64-bit seed from a tuple of integers (SeedSequence spawn-by-key)."""
    ss = np.random.SeedSequence([int(e) for e in entropy])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_seeds(base_seed: int, count: int) -> list[int]:
    """count independent 64-bit seeds derived from one base seed."""
    ss = np.random.SeedSequence(int(base_seed))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def format_sig(x: float, digits: int = 9) -> str:
    """Fixed significant-digit decimal rendering used by the CSV writers."""
    return f"{x:.{digits}g}"
