"""Benchmark the segmented max-dot kernels: numba @njit vs pure numpy.

Builds a synthetic pool-shaped bank (many short segments), then times
both implementations on identical inputs. The first numba call compiles,
so a warmup round runs before timing.

    python3 benchmarks/bench_kernels.py --segments 20000 --queries 4
"""
import argparse
import time

import numpy as np

from cfre.kernels import (
    HAS_NUMBA,
    segment_max_dot_numba,
    segment_max_dot_numpy,
)


def make_inputs(rng, n_segments: int, dim: int, n_queries: int):
    lengths = rng.integers(1, 6, size=n_segments)
    ends = np.cumsum(lengths)
    starts = (ends - lengths).astype(np.int64)
    bank = rng.standard_normal((int(ends[-1]), dim))
    bank /= np.linalg.norm(bank, axis=1)[:, None]
    query = rng.standard_normal((n_queries, dim))
    query /= np.linalg.norm(query, axis=1)[:, None]
    sel = np.arange(n_segments, dtype=np.int64)
    return query, bank, starts, ends.astype(np.int64), sel


def time_impl(fn, args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--segments", type=int, default=20000)
    parser.add_argument("--dim", type=int, default=384)
    parser.add_argument("--queries", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    inputs = make_inputs(rng, args.segments, args.dim, args.queries)

    out_np = segment_max_dot_numpy(*inputs)
    t_np = time_impl(segment_max_dot_numpy, inputs, args.repeats)
    print(f"numpy : {t_np * 1e3:8.2f} ms  ({args.segments} segments, dim {args.dim})")

    if not HAS_NUMBA:
        print("numba : unavailable")
        return 0

    segment_max_dot_numba(*inputs)  # compile
    out_nb = segment_max_dot_numba(*inputs)
    t_nb = time_impl(segment_max_dot_numba, inputs, args.repeats)
    print(f"numba : {t_nb * 1e3:8.2f} ms")
    print(f"speedup numpy/numba: {t_np / t_nb:.2f}x")

    if not np.allclose(out_np, out_nb, atol=1e-10):
        print("MISMATCH between implementations")
        return 1
    print(f"outputs agree (max |diff| {np.abs(out_np - out_nb).max():.2e})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
