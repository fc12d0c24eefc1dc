"""Segmented max-dot-product kernels behind the candidate search.

The candidate scan reduces, for each pool entry, a max over all pairs of
query vectors and that entry's vectors. With row-normalized inputs the dot
product is the cosine, so these kernels carry the entire numeric cost of
the search.

Two interchangeable implementations are provided: a numba ``@njit`` kernel
(default when numba imports) and a pure-numpy fallback. Set ``CFRE_NUMBA=0``
to force the numpy path; ``benchmarks/bench_kernels.py`` compares the two.
"""
from __future__ import annotations

import os
import threading

import numpy as np

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

_ENV_FLAG = os.environ.get("CFRE_NUMBA", "1").strip().lower()
USE_NUMBA = HAS_NUMBA and _ENV_FLAG not in ("0", "false", "no")


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def normalize_rows(mat: np.ndarray, where: str = "matrix") -> np.ndarray:
    """Return a C-contiguous float64 copy with unit-norm rows."""
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"{where}: expected 2-d matrix, got shape {mat.shape}")
    if mat.shape[0] == 0:
        return mat
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise ValueError(f"{where}: row {bad} is a zero vector")
    return mat / norms[:, None]


def segment_max_dot_numpy(
    query: np.ndarray,
    bank: np.ndarray,
    starts: np.ndarray,
    ends: np.ndarray,
    sel: np.ndarray,
) -> np.ndarray:
    """Max dot product between query rows and each selected bank segment.

    ``bank[starts[e]:ends[e]]`` holds segment ``e``'s rows; ``sel`` lists the
    segment indices to score. Empty segments (or an empty query) score 0.0.
    """
    out = np.zeros(len(sel), dtype=np.float64)
    if len(sel) == 0 or query.shape[0] == 0:
        return out
    lengths = ends[sel] - starts[sel]
    nonempty = lengths > 0
    if not np.any(nonempty):
        return out
    idx = np.concatenate(
        [np.arange(starts[e], ends[e]) for e in sel[nonempty]]
    )
    sims = query @ bank[idx].T
    col_max = sims.max(axis=0)
    bounds = np.concatenate([[0], np.cumsum(lengths[nonempty])])
    out[nonempty] = np.maximum.reduceat(col_max, bounds[:-1])
    return out


if HAS_NUMBA:

    @njit(parallel=True)
    def _segment_max_dot_jit(query, bank, starts, ends, sel):  # pragma: no cover
        n_sel = sel.shape[0]
        n_query = query.shape[0]
        dim = query.shape[1]
        out = np.zeros(n_sel, dtype=np.float64)
        for k in prange(n_sel):
            e = sel[k]
            best = 0.0
            found = False
            for r in range(starts[e], ends[e]):
                for i in range(n_query):
                    acc = 0.0
                    for j in range(dim):
                        acc += query[i, j] * bank[r, j]
                    if not found or acc > best:
                        best = acc
                        found = True
            if found:
                out[k] = best
        return out

    # the workqueue threading layer aborts on concurrent kernel entry; the
    # kernel parallelizes internally, so outer callers serialize on a lock
    _JIT_LOCK = threading.Lock()

    def segment_max_dot_numba(query, bank, starts, ends, sel):
        if len(sel) == 0 or query.shape[0] == 0:
            return np.zeros(len(sel), dtype=np.float64)
        with _JIT_LOCK:
            return _segment_max_dot_jit(
                np.ascontiguousarray(query, dtype=np.float64),
                np.ascontiguousarray(bank, dtype=np.float64),
                np.asarray(starts, dtype=np.int64),
                np.asarray(ends, dtype=np.int64),
                np.asarray(sel, dtype=np.int64),
            )

else:  # pragma: no cover
    segment_max_dot_numba = segment_max_dot_numpy


def segment_max_dot(query, bank, starts, ends, sel) -> np.ndarray:
    if USE_NUMBA:
        return segment_max_dot_numba(query, bank, starts, ends, sel)
    return segment_max_dot_numpy(query, bank, starts, ends, sel)
